//! Laplacian construction for undirected and directed graphs, singular-value
//! signatures, and the anomaly scores Z1, Z2, Z.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphseq::GraphSnapshot;

/// Singular values of a Laplacian matrix, sorted descending. A
/// permutation-invariant descriptor of the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSignature {
    sigma: DVector<f64>,
    /// Set when the Perron vector needed teleportation to converge.
    pub perturbed: bool,
}

impl SpectrumSignature {
    pub fn from_values(sigma: DVector<f64>) -> Self {
        Self { sigma, perturbed: false }
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.sigma
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.len() == 0
    }
}

/// Anomaly scores for one timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreTriple {
    pub z1: f64,
    pub z2: f64,
    pub z: f64,
    pub alpha: f64,
}

/// Normalized Laplacian `L = I - D^{-1/2} W D^{-1/2}`. Rows and columns of
/// isolated (zero-degree) nodes are set to 0, so the empty graph maps to the
/// zero matrix.
pub fn laplacian_undirected(g: &GraphSnapshot) -> DMatrix<f64> {
    let w = g.weights();
    let n = g.n();
    let degree: Vec<f64> = (0..n).map(|i| w.row(i).sum()).collect();
    let inv_sqrt: Vec<f64> =
        degree.iter().map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 }).collect();
    DMatrix::from_fn(n, n, |i, j| {
        if degree[i] <= 0.0 || degree[j] <= 0.0 {
            0.0
        } else {
            let identity = if i == j { 1.0 } else { 0.0 };
            identity - inv_sqrt[i] * w[(i, j)] * inv_sqrt[j]
        }
    })
}

/// Row-stochastic transition matrix `P_ij = w_ij / sum_j w_ij`. Rows with no
/// out-weight become uniform so a Perron vector always exists.
pub fn transition_matrix(g: &GraphSnapshot) -> DMatrix<f64> {
    let w = g.weights();
    let n = g.n();
    let row_sums: Vec<f64> = (0..n).map(|i| w.row(i).sum()).collect();
    DMatrix::from_fn(n, n, |i, j| {
        if row_sums[i] > 0.0 {
            w[(i, j)] / row_sums[i]
        } else {
            1.0 / n as f64
        }
    })
}

const POWER_ITER_CAP: usize = 10_000;
const POWER_ITER_TOL: f64 = 1e-10;
const TELEPORT_GAMMA: f64 = 0.05;

/// Stationary distribution of a row-stochastic matrix.
pub struct PerronVector {
    pub phi: DVector<f64>,
    /// True when the plain power iteration failed and teleportation was
    /// applied.
    pub perturbed: bool,
}

fn power_iterate(p: &DMatrix<f64>) -> Option<DVector<f64>> {
    let n = p.nrows();
    let mut phi = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..POWER_ITER_CAP {
        let mut next = p.transpose() * &phi;
        let sum = next.sum();
        if sum <= 0.0 || !sum.is_finite() {
            return None;
        }
        next /= sum;
        let diff = (&next - &phi).amax();
        phi = next;
        if diff < POWER_ITER_TOL {
            return Some(phi);
        }
    }
    None
}

/// Perron vector via power iteration on `P^T`; falls back to teleportation
/// `(1-gamma) P + gamma/n J` for reducible or periodic inputs.
pub fn perron_vector(p: &DMatrix<f64>) -> Result<PerronVector> {
    if let Some(phi) = power_iterate(p) {
        if phi.iter().all(|&x| x > 0.0) {
            return Ok(PerronVector { phi, perturbed: false });
        }
    }
    let n = p.nrows();
    let jump = TELEPORT_GAMMA / n as f64;
    let teleported = p.map(|x| (1.0 - TELEPORT_GAMMA) * x + jump);
    match power_iterate(&teleported) {
        Some(phi) => Ok(PerronVector { phi, perturbed: true }),
        None => Err(Error::NonConvergence { iterations: POWER_ITER_CAP }),
    }
}

/// Symmetrized directed Laplacian
/// `L = I - (Phi^{1/2} P Phi^{-1/2} + Phi^{-1/2} P^T Phi^{1/2}) / 2`
/// with the Perron vector of `P` on the diagonal of `Phi`.
pub fn laplacian_directed(g: &GraphSnapshot) -> Result<(DMatrix<f64>, bool)> {
    let p = transition_matrix(g);
    let PerronVector { phi, perturbed } = perron_vector(&p)?;
    let n = g.n();
    let sqrt_phi: Vec<f64> = phi.iter().map(|&x| x.sqrt()).collect();
    let l = DMatrix::from_fn(n, n, |i, j| {
        let identity = if i == j { 1.0 } else { 0.0 };
        let forward = sqrt_phi[i] * p[(i, j)] / sqrt_phi[j];
        let backward = p[(j, i)] * sqrt_phi[j] / sqrt_phi[i];
        identity - 0.5 * (forward + backward)
    });
    Ok((l, perturbed))
}

/// Singular values of a symmetric matrix: absolute eigenvalues, sorted
/// descending.
pub fn spectrum(l: &DMatrix<f64>) -> SpectrumSignature {
    spectrum_flagged(l, false)
}

pub fn spectrum_flagged(l: &DMatrix<f64>, perturbed: bool) -> SpectrumSignature {
    let eigen = SymmetricEigen::new(l.clone());
    let mut sigma: Vec<f64> = eigen.eigenvalues.iter().map(|&x| x.abs()).collect();
    sigma.sort_by(|a, b| b.partial_cmp(a).unwrap());
    SpectrumSignature { sigma: DVector::from_vec(sigma), perturbed }
}

/// Element-wise mean of a window of signatures (the "normal" pattern). The
/// result is not re-sorted; it is only consumed by the cosine scores.
pub fn normal_pattern(signatures: &[SpectrumSignature]) -> Result<SpectrumSignature> {
    let first = signatures
        .first()
        .ok_or_else(|| Error::InvalidConfig("empty signature window".into()))?;
    let len = first.len();
    let mut mean = DVector::zeros(len);
    let mut perturbed = false;
    for sig in signatures {
        if sig.len() != len {
            return Err(Error::ShapeMismatch {
                context: format!("signature length {} vs {}", sig.len(), len),
            });
        }
        mean += &sig.sigma;
        perturbed |= sig.perturbed;
    }
    mean /= signatures.len() as f64;
    Ok(SpectrumSignature { sigma: mean, perturbed })
}

/// Cosine distance `1 - cos(x, y)` with the zero-vector convention: both
/// zero -> 0, exactly one zero -> 1.
fn cosine_score(x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let nx = x.norm();
    let ny = y.norm();
    if nx == 0.0 && ny == 0.0 {
        return 0.0;
    }
    if nx == 0.0 || ny == 0.0 {
        return 1.0;
    }
    let cos = (x.dot(y) / (nx * ny)).clamp(0.0, 1.0);
    1.0 - cos
}

/// Z1: cosine distance between the predicted and actual signatures.
pub fn score_z1(sigma_p: &SpectrumSignature, sigma_a: &SpectrumSignature) -> f64 {
    cosine_score(&sigma_p.sigma, &sigma_a.sigma)
}

/// Z2: cosine distance between the normal pattern and the actual signature.
pub fn score_z2(sigma_nor: &SpectrumSignature, sigma_a: &SpectrumSignature) -> f64 {
    cosine_score(&sigma_nor.sigma, &sigma_a.sigma)
}

/// Convex combination `Z = alpha * Z1 + (1 - alpha) * Z2`.
pub fn combine_score(z1: f64, z2: f64, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidConfig(format!("alpha must be in [0, 1], got {alpha}")));
    }
    Ok(alpha * z1 + (1.0 - alpha) * z2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn snap(w: DMatrix<f64>, directed: bool) -> GraphSnapshot {
        GraphSnapshot::new(0, w, directed)
    }

    fn random_graph(n: usize, directed: bool, seed: u64) -> GraphSnapshot {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = DMatrix::from_fn(n, n, |i, j| {
            if i == j { 0.0 } else if rng.random::<f64>() < 0.5 { rng.random::<f64>() } else { 0.0 }
        });
        if !directed {
            w = (&w + w.transpose()) * 0.5;
        }
        snap(w, directed)
    }

    #[test]
    fn single_edge_laplacian() {
        let l = laplacian_undirected(&snap(dmatrix![0.0, 1.0; 1.0, 0.0], false));
        let expected = dmatrix![1.0, -1.0; -1.0, 1.0];
        assert!((l - &expected).amax() < 1e-14);
        let sig = spectrum(&expected);
        assert!((sig.values()[0] - 2.0).abs() < 1e-12);
        assert!(sig.values()[1].abs() < 1e-12);
    }

    #[test]
    fn laplacian_scale_invariant() {
        let g = random_graph(8, false, 1);
        let scaled = snap(g.weights() * 7.3, false);
        let diff = laplacian_undirected(&g) - laplacian_undirected(&scaled);
        assert!(diff.amax() < 1e-12);
    }

    #[test]
    fn empty_graph_zero_laplacian_and_spectrum() {
        let g = snap(DMatrix::zeros(4, 4), false);
        let l = laplacian_undirected(&g);
        assert!(l.amax() == 0.0);
        let sig = spectrum(&l);
        assert!(sig.values().amax() == 0.0);
    }

    #[test]
    fn isolated_node_row_zeroed() {
        // triangle on {0,1,2} plus isolated node 3
        let mut w = DMatrix::zeros(4, 4);
        for (i, j) in [(0, 1), (1, 2), (0, 2)] {
            w[(i, j)] = 1.0;
            w[(j, i)] = 1.0;
        }
        let l = laplacian_undirected(&snap(w, false));
        for i in 0..4 {
            assert_eq!(l[(3, i)], 0.0);
            assert_eq!(l[(i, 3)], 0.0);
        }
        assert!((l[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn laplacian_eigenvalues_in_unit_band() {
        // normalized Laplacian eigenvalues live in [0, 2]
        for seed in 0..10 {
            let g = random_graph(10, false, 100 + seed);
            let sig = spectrum(&laplacian_undirected(&g));
            assert!(sig.values()[0] <= 2.0 + 1e-10);
        }
    }

    #[test]
    fn spectrum_matches_svd_oracle() {
        for seed in 0..10 {
            let g = random_graph(9, false, 200 + seed);
            let l = laplacian_undirected(&g);
            let sig = spectrum(&l);
            let mut sv: Vec<f64> = l.svd(false, false).singular_values.iter().copied().collect();
            sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
            for i in 0..9 {
                assert!((sig.values()[i] - sv[i]).abs() < 1e-9, "seed {seed} index {i}");
            }
        }
    }

    #[test]
    fn spectrum_sorted_descending() {
        let g = random_graph(12, false, 3);
        let sig = spectrum(&laplacian_undirected(&g));
        for i in 1..12 {
            assert!(sig.values()[i - 1] >= sig.values()[i]);
        }
    }

    #[test]
    fn spectrum_permutation_invariant() {
        let g = random_graph(8, false, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut perm: Vec<usize> = (0..8).collect();
        for i in (1..8).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let w = g.weights();
        let pw = DMatrix::from_fn(8, 8, |i, j| w[(perm[i], perm[j])]);
        let a = spectrum(&laplacian_undirected(&g));
        let b = spectrum(&laplacian_undirected(&snap(pw, false)));
        assert!((a.values() - b.values()).amax() < 1e-10);
    }

    #[test]
    fn transition_matrix_row_normalizes() {
        let p = transition_matrix(&snap(dmatrix![0.0, 2.0, 6.0; 0.0, 0.0, 0.0; 1.0, 1.0, 0.0], true));
        assert!((p[(0, 1)] - 0.25).abs() < 1e-14);
        assert!((p[(0, 2)] - 0.75).abs() < 1e-14);
        // zero row becomes uniform
        for j in 0..3 {
            assert!((p[(1, j)] - 1.0 / 3.0).abs() < 1e-14);
        }
        assert!((p[(2, 0)] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn three_cycle_transition_is_permutation() {
        let w = dmatrix![0.0, 1.0, 0.0; 0.0, 0.0, 1.0; 1.0, 0.0, 0.0];
        let p = transition_matrix(&snap(w.clone(), true));
        assert!((p - w).amax() < 1e-14);
    }

    #[test]
    fn perron_uniform_for_doubly_stochastic() {
        let p = dmatrix![0.5, 0.3, 0.2; 0.2, 0.5, 0.3; 0.3, 0.2, 0.5];
        let res = perron_vector(&p).unwrap();
        assert!(!res.perturbed);
        for i in 0..3 {
            assert!((res.phi[i] - 1.0 / 3.0).abs() < 1e-8);
        }
    }

    #[test]
    fn perron_proportional_to_degree_on_undirected() {
        // random walk on an undirected graph: phi_i = d_i / sum(d)
        let g = random_graph(7, false, 6);
        let p = transition_matrix(&g);
        let res = perron_vector(&p).unwrap();
        let d: Vec<f64> = (0..7).map(|i| g.weights().row(i).sum()).collect();
        let vol: f64 = d.iter().sum();
        for i in 0..7 {
            assert!((res.phi[i] - d[i] / vol).abs() < 1e-7, "node {i}");
        }
    }

    #[test]
    fn perron_two_state_chain() {
        let p = dmatrix![0.9, 0.1; 0.5, 0.5];
        let res = perron_vector(&p).unwrap();
        assert!((res.phi[0] - 5.0 / 6.0).abs() < 1e-8);
        assert!((res.phi[1] - 1.0 / 6.0).abs() < 1e-8);
    }

    #[test]
    fn perron_periodic_chain_needs_teleportation() {
        // unbalanced bipartite chain: plain power iteration oscillates
        let p = dmatrix![0.0, 0.5, 0.5; 1.0, 0.0, 0.0; 1.0, 0.0, 0.0];
        let res = perron_vector(&p).unwrap();
        assert!(res.perturbed);
        assert!(res.phi.iter().all(|&x| x > 0.0));
        assert!((res.phi.sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn perron_symmetric_cycle_converges_uniform() {
        // doubly stochastic: the uniform start is already stationary
        let p = dmatrix![0.0, 1.0; 1.0, 0.0];
        let res = perron_vector(&p).unwrap();
        assert!(!res.perturbed);
        assert!((res.phi[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn directed_laplacian_reduces_to_undirected() {
        // for symmetric W the directed construction equals I - D^{-1/2} W D^{-1/2}
        for seed in 0..5 {
            let mut g = random_graph(8, false, 300 + seed);
            // ensure connectivity so the Perron vector is clean
            let mut w = g.weights().clone();
            for i in 0..7 {
                if w[(i, i + 1)] == 0.0 {
                    w[(i, i + 1)] = 0.3;
                    w[(i + 1, i)] = 0.3;
                }
            }
            g = snap(w, false);
            let (ld, perturbed) = laplacian_directed(&g).unwrap();
            assert!(!perturbed);
            let lu = laplacian_undirected(&g);
            assert!((ld - lu).amax() < 1e-7, "seed {seed}");
        }
    }

    #[test]
    fn directed_laplacian_symmetric() {
        let g = random_graph(8, true, 7);
        let (l, _) = laplacian_directed(&g).unwrap();
        assert!((l.clone() - l.transpose()).amax() < 1e-12);
    }

    #[test]
    fn normal_pattern_averages() {
        let a = SpectrumSignature::from_values(DVector::from_vec(vec![2.0, 1.0]));
        let b = SpectrumSignature::from_values(DVector::from_vec(vec![4.0, 3.0]));
        let mean = normal_pattern(&[a, b]).unwrap();
        assert_eq!(mean.values()[0], 3.0);
        assert_eq!(mean.values()[1], 2.0);
        assert!(!mean.perturbed);
    }

    #[test]
    fn normal_pattern_propagates_perturbed_flag() {
        let mut a = SpectrumSignature::from_values(DVector::from_vec(vec![1.0]));
        a.perturbed = true;
        let b = SpectrumSignature::from_values(DVector::from_vec(vec![1.0]));
        assert!(normal_pattern(&[a, b]).unwrap().perturbed);
    }

    #[test]
    fn normal_pattern_rejects_mixed_lengths() {
        let a = SpectrumSignature::from_values(DVector::from_vec(vec![1.0]));
        let b = SpectrumSignature::from_values(DVector::from_vec(vec![1.0, 2.0]));
        assert!(normal_pattern(&[a, b]).is_err());
        assert!(normal_pattern(&[]).is_err());
    }

    #[test]
    fn cosine_score_examples() {
        let sig = |v: Vec<f64>| SpectrumSignature::from_values(DVector::from_vec(v));
        // parallel -> 0
        assert!(score_z1(&sig(vec![1.0, 2.0]), &sig(vec![3.0, 6.0])).abs() < 1e-14);
        // orthogonal -> 1
        assert!((score_z1(&sig(vec![1.0, 0.0]), &sig(vec![0.0, 1.0])) - 1.0).abs() < 1e-14);
        // 45 degrees -> 1 - 1/sqrt(2)
        let got = score_z1(&sig(vec![1.0, 0.0]), &sig(vec![1.0, 1.0]));
        assert!((got - (1.0 - 1.0 / 2f64.sqrt())).abs() < 1e-12);
        // zero conventions
        assert_eq!(score_z2(&sig(vec![0.0, 0.0]), &sig(vec![0.0, 0.0])), 0.0);
        assert_eq!(score_z2(&sig(vec![0.0, 0.0]), &sig(vec![1.0, 0.0])), 1.0);
    }

    #[test]
    fn scores_stay_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let x = SpectrumSignature::from_values(DVector::from_fn(5, |_, _| rng.random::<f64>()));
            let y = SpectrumSignature::from_values(DVector::from_fn(5, |_, _| rng.random::<f64>()));
            let z = score_z1(&x, &y);
            assert!((0.0..=1.0).contains(&z));
        }
    }

    #[test]
    fn combine_score_examples() {
        assert!((combine_score(0.5, 0.1, 0.2).unwrap() - 0.18).abs() < 1e-14);
        assert_eq!(combine_score(0.3, 0.7, 0.0).unwrap(), 0.7);
        assert_eq!(combine_score(0.3, 0.7, 1.0).unwrap(), 0.3);
        assert!(combine_score(0.3, 0.7, 1.5).is_err());
        assert!(combine_score(0.3, 0.7, -0.1).is_err());
    }
}
