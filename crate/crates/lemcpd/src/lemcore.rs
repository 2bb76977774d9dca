//! The latent evolution model: joint objective, multiplicative update rules,
//! long-term guidance, and one-step prediction.
//!
//! Each snapshot in a short window of length `T` is approximated by a
//! non-negative tri-factorization `G_t ~ U_t C V_t` with a shared interaction
//! matrix `C`. Transition matrices `A` and `B` model the drift of the
//! factors across time (`U_t ~ U_{t-1} A`, `V_t ~ V_{t-1} B`), and guide
//! matrices learned over a longer window anchor the factors at the current
//! timestamp. The total loss is
//!
//! `L = J + lambda1 * T + lambda2 * H`
//!
//! with `J` the reconstruction term, `T` the transition term (summed from
//! the second timestamp), and `H` the long-term guidance term. All factors
//! stay non-negative under the multiplicative updates.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphseq::{frobenius_distance, GraphSequence};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Latent dimension k.
    pub k: usize,
    /// Short window size T (snapshot count).
    pub window: usize,
    /// Long window = long_multiplier * window.
    pub long_multiplier: usize,
    /// Transition regularizer weight.
    pub lambda1: f64,
    /// Long-term guidance regularizer weight.
    pub lambda2: f64,
    /// Relative-change stopping tolerance.
    pub epsilon: f64,
    /// Iteration cap.
    pub max_iter: usize,
    /// Small positive value added to update denominators.
    pub delta_guard: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            k: 16,
            window: 3,
            long_multiplier: 4,
            lambda1: 0.5,
            lambda2: 8.0,
            epsilon: 1e-4,
            max_iter: 200,
            delta_guard: 1e-12,
        }
    }
}

impl HyperParams {
    pub fn long_window(&self) -> usize {
        self.window * self.long_multiplier
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidConfig("k must be >= 1".into()));
        }
        if self.window < 1 {
            return Err(Error::InvalidConfig("window must be >= 1".into()));
        }
        if self.long_multiplier < 1 {
            return Err(Error::InvalidConfig("long_multiplier must be >= 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("epsilon must be > 0".into()));
        }
        if !(self.delta_guard > 0.0) {
            return Err(Error::InvalidConfig("delta_guard must be > 0".into()));
        }
        if self.lambda1 < 0.0 || self.lambda2 < 0.0 {
            return Err(Error::InvalidConfig("lambda1/lambda2 must be >= 0".into()));
        }
        Ok(())
    }
}

/// Per-timestamp factors plus the shared interaction and transition matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    /// T matrices, each n x k.
    pub u: Vec<DMatrix<f64>>,
    /// T matrices, each k x n.
    pub v: Vec<DMatrix<f64>>,
    /// k x k interaction pattern, shared across the window.
    pub c: DMatrix<f64>,
    /// k x k transition for U.
    pub a: DMatrix<f64>,
    /// n x n transition for V.
    pub b: DMatrix<f64>,
}

impl LatentState {
    pub fn window(&self) -> usize {
        self.u.len()
    }

    pub fn n(&self) -> usize {
        self.u[0].nrows()
    }

    pub fn k(&self) -> usize {
        self.u[0].ncols()
    }

    /// Cold start: uniform (0, 1] entries scaled by sqrt(mean(G)/k) for the
    /// factors, near-identity transitions.
    pub fn random_init<R: Rng>(seq: &GraphSequence, hp: &HyperParams, rng: &mut R) -> Self {
        let n = seq.n();
        let k = hp.k;
        let t_len = seq.len();
        let mean: f64 = seq
            .snapshots()
            .iter()
            .map(|s| s.weights().sum())
            .sum::<f64>()
            / (t_len as f64 * (n * n) as f64);
        let scale = (mean.max(1e-6) / k as f64).sqrt();
        let mut mat = |r: usize, c: usize| {
            DMatrix::from_fn(r, c, |_, _| scale * (1.0 - rng.random::<f64>()))
        };
        let u = (0..t_len).map(|_| mat(n, k)).collect();
        let v = (0..t_len).map(|_| mat(k, n)).collect();
        // Keep the total off-diagonal mass per row small regardless of the
        // matrix size so transitions start close to the identity map.
        let near_identity = |d: usize| {
            let off = 0.01 / d as f64;
            DMatrix::from_fn(d, d, |i, j| if i == j { 1.01 } else { off })
        };
        Self { u, v, c: near_identity(k), a: near_identity(k), b: near_identity(n) }
    }

    pub fn is_nonnegative(&self) -> bool {
        let ok = |m: &DMatrix<f64>| m.iter().all(|&x| x >= 0.0);
        self.u.iter().all(ok) && self.v.iter().all(ok) && ok(&self.c) && ok(&self.a) && ok(&self.b)
    }

    fn check_shapes(&self, seq: &GraphSequence, hp: &HyperParams) -> Result<()> {
        let n = seq.n();
        let k = hp.k;
        if self.u.len() != seq.len() || self.v.len() != seq.len() {
            return Err(Error::ShapeMismatch {
                context: format!("state window {} vs sequence {}", self.u.len(), seq.len()),
            });
        }
        for m in &self.u {
            if m.nrows() != n || m.ncols() != k {
                return Err(Error::ShapeMismatch { context: "U_t shape".into() });
            }
        }
        for m in &self.v {
            if m.nrows() != k || m.ncols() != n {
                return Err(Error::ShapeMismatch { context: "V_t shape".into() });
            }
        }
        if self.c.shape() != (k, k) || self.a.shape() != (k, k) || self.b.shape() != (n, n) {
            return Err(Error::ShapeMismatch { context: "C/A/B shape".into() });
        }
        Ok(())
    }
}

/// Guide matrices and adaptive weights learned from the long window.
#[derive(Debug, Clone, PartialEq)]
pub struct LongTermGuide {
    /// n x k.
    pub u_lt: DMatrix<f64>,
    /// k x n.
    pub v_lt: DMatrix<f64>,
    /// Adaptive weights over the long window; sums to 1.
    pub r: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    /// Reconstruction term J.
    pub reconstruction: f64,
    /// Transition term (summed from the second timestamp).
    pub transition: f64,
    /// Long-term guidance term H.
    pub longterm: f64,
    /// J + lambda1 * transition + lambda2 * H.
    pub total: f64,
}

fn sq_norm(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|x| x * x).sum()
}

/// Evaluates the joint objective.
pub fn objective(
    seq: &GraphSequence,
    state: &LatentState,
    guide: &LongTermGuide,
    hp: &HyperParams,
) -> Result<LossBreakdown> {
    state.check_shapes(seq, hp)?;
    let t_len = seq.len();
    let mut reconstruction = 0.0;
    for t in 0..t_len {
        let g = seq.snapshots()[t].weights();
        let approx = &state.u[t] * &state.c * &state.v[t];
        reconstruction += sq_norm(&(g - approx));
    }
    let mut transition = 0.0;
    for t in 1..t_len {
        transition += sq_norm(&(&state.u[t] - &state.u[t - 1] * &state.a));
        transition += sq_norm(&(&state.v[t] - &state.v[t - 1] * &state.b));
    }
    let last = t_len - 1;
    let longterm = sq_norm(&(&guide.u_lt - &state.u[last] * &state.a))
        + sq_norm(&(&guide.v_lt - &state.v[last] * &state.b));
    let total = reconstruction + hp.lambda1 * transition + hp.lambda2 * longterm;
    Ok(LossBreakdown { reconstruction, transition, longterm, total })
}

fn multiplicative_step(
    old: &DMatrix<f64>,
    num: &DMatrix<f64>,
    den: &DMatrix<f64>,
    delta: f64,
) -> DMatrix<f64> {
    old.zip_zip_map(num, den, |o, n, d| o * n / (d + delta))
}

/// One multiplicative update of `U_t`. `t` is a 0-based window index; the
/// long-term terms apply only at the last index, and neighbor terms that
/// would fall outside the window are dropped together with their
/// denominator counterparts.
pub fn update_u(
    state: &mut LatentState,
    seq: &GraphSequence,
    guide: &LongTermGuide,
    hp: &HyperParams,
    t: usize,
) -> Result<()> {
    state.check_shapes(seq, hp)?;
    let last = state.window() - 1;
    let g = seq.snapshots()[t].weights();
    let cv = &state.c * &state.v[t]; // k x n
    let mut num = g * cv.transpose();
    let mut den = (&state.u[t] * &cv) * cv.transpose();
    if hp.lambda1 > 0.0 {
        if t > 0 {
            num += hp.lambda1 * (&state.u[t - 1] * &state.a);
            den += hp.lambda1 * &state.u[t];
        }
        if t < last {
            num += hp.lambda1 * (&state.u[t + 1] * state.a.transpose());
            den += hp.lambda1 * (&state.u[t] * (&state.a * state.a.transpose()));
        }
    }
    if hp.lambda2 > 0.0 && t == last {
        num += hp.lambda2 * (&guide.u_lt * state.a.transpose());
        den += hp.lambda2 * (&state.u[last] * (&state.a * state.a.transpose()));
    }
    state.u[t] = multiplicative_step(&state.u[t], &num, &den, hp.delta_guard);
    Ok(())
}

/// Mirror of [`update_u`] for `V_t`.
pub fn update_v(
    state: &mut LatentState,
    seq: &GraphSequence,
    guide: &LongTermGuide,
    hp: &HyperParams,
    t: usize,
) -> Result<()> {
    state.check_shapes(seq, hp)?;
    let last = state.window() - 1;
    let g = seq.snapshots()[t].weights();
    let uc = &state.u[t] * &state.c; // n x k
    let mut num = uc.transpose() * g;
    let mut den = uc.transpose() * (&uc * &state.v[t]);
    if hp.lambda1 > 0.0 {
        if t > 0 {
            num += hp.lambda1 * (&state.v[t - 1] * &state.b);
            den += hp.lambda1 * &state.v[t];
        }
        if t < last {
            num += hp.lambda1 * (&state.v[t + 1] * state.b.transpose());
            den += hp.lambda1 * (&state.v[t] * (&state.b * state.b.transpose()));
        }
    }
    if hp.lambda2 > 0.0 && t == last {
        num += hp.lambda2 * (&guide.v_lt * state.b.transpose());
        den += hp.lambda2 * (&state.v[last] * (&state.b * state.b.transpose()));
    }
    state.v[t] = multiplicative_step(&state.v[t], &num, &den, hp.delta_guard);
    Ok(())
}

/// Multiplicative update of the transition matrix `A`. When both
/// regularizers are zero the objective does not depend on `A` and the
/// update is skipped.
pub fn update_a(state: &mut LatentState, guide: &LongTermGuide, hp: &HyperParams) -> Result<()> {
    if hp.lambda1 == 0.0 && hp.lambda2 == 0.0 {
        return Ok(());
    }
    let k = state.k();
    let last = state.window() - 1;
    let mut num = DMatrix::zeros(k, k);
    let mut den = DMatrix::zeros(k, k);
    for t in 1..state.window() {
        num += hp.lambda1 * (state.u[t - 1].transpose() * &state.u[t]);
        den += hp.lambda1 * (state.u[t - 1].transpose() * (&state.u[t - 1] * &state.a));
    }
    num += hp.lambda2 * (state.u[last].transpose() * &guide.u_lt);
    den += hp.lambda2 * (state.u[last].transpose() * (&state.u[last] * &state.a));
    state.a = multiplicative_step(&state.a, &num, &den, hp.delta_guard);
    Ok(())
}

/// Mirror of [`update_a`] on the V factors; all products are n x n.
pub fn update_b(state: &mut LatentState, guide: &LongTermGuide, hp: &HyperParams) -> Result<()> {
    if hp.lambda1 == 0.0 && hp.lambda2 == 0.0 {
        return Ok(());
    }
    let n = state.n();
    let last = state.window() - 1;
    let mut num = DMatrix::zeros(n, n);
    let mut den = DMatrix::zeros(n, n);
    for t in 1..state.window() {
        num += hp.lambda1 * (state.v[t - 1].transpose() * &state.v[t]);
        den += hp.lambda1 * (state.v[t - 1].transpose() * (&state.v[t - 1] * &state.b));
    }
    num += hp.lambda2 * (state.v[last].transpose() * &guide.v_lt);
    den += hp.lambda2 * (state.v[last].transpose() * (&state.v[last] * &state.b));
    state.b = multiplicative_step(&state.b, &num, &den, hp.delta_guard);
    Ok(())
}

/// Multiplicative update of the shared interaction matrix `C`.
pub fn update_c(state: &mut LatentState, seq: &GraphSequence, hp: &HyperParams) -> Result<()> {
    let k = state.k();
    let mut num = DMatrix::zeros(k, k);
    let mut den = DMatrix::zeros(k, k);
    for t in 0..state.window() {
        let g = seq.snapshots()[t].weights();
        num += state.u[t].transpose() * g * state.v[t].transpose();
        den += state.u[t].transpose() * (&state.u[t] * &state.c * &state.v[t]) * state.v[t].transpose();
    }
    state.c = multiplicative_step(&state.c, &num, &den, hp.delta_guard);
    Ok(())
}

/// Adaptive weights over the long window: similarity to the last snapshot
/// via `1 / (1 + frobenius_distance)`, normalized to sum 1, then softmax.
pub fn adaptive_weights(long_seq: &GraphSequence) -> Result<DVector<f64>> {
    let len = long_seq.len();
    let current = &long_seq.snapshots()[len - 1];
    let mut s = DVector::zeros(len);
    for (t, snap) in long_seq.snapshots().iter().enumerate() {
        let d = frobenius_distance(snap, current)?;
        s[t] = 1.0 / (1.0 + d);
    }
    let sum = s.sum();
    s /= sum;
    let max = s.max();
    let mut r = s.map(|x| (x - max).exp());
    let z = r.sum();
    r /= z;
    Ok(r)
}

/// Weighted squared reconstruction error of the guide factors over the long
/// window: `sum_t r_t ||G_t - U V||_F^2`.
pub fn guide_objective(
    long_seq: &GraphSequence,
    r: &DVector<f64>,
    u_lt: &DMatrix<f64>,
    v_lt: &DMatrix<f64>,
) -> f64 {
    let uv = u_lt * v_lt;
    long_seq
        .snapshots()
        .iter()
        .enumerate()
        .map(|(t, s)| r[t] * sq_norm(&(s.weights() - &uv)))
        .sum()
}

/// Learns the guide matrices by alternating weighted multiplicative updates
/// until the relative change of the weighted objective drops below
/// `hp.epsilon` or `hp.max_iter` sweeps.
pub fn fit_longterm<R: Rng>(
    long_seq: &GraphSequence,
    r: &DVector<f64>,
    hp: &HyperParams,
    init: Option<(DMatrix<f64>, DMatrix<f64>)>,
    rng: &mut R,
) -> Result<LongTermGuide> {
    if long_seq.len() != r.len() {
        return Err(Error::ShapeMismatch {
            context: format!("weights {} vs window {}", r.len(), long_seq.len()),
        });
    }
    let n = long_seq.n();
    let k = hp.k;
    // With sum(r) = 1, the weighted updates collapse onto the r-weighted
    // average graph.
    let mut g_bar = DMatrix::zeros(n, n);
    for (t, s) in long_seq.snapshots().iter().enumerate() {
        g_bar += r[t] * s.weights();
    }
    let (mut u, mut v) = match init {
        Some((u, v)) if u.shape() == (n, k) && v.shape() == (k, n) => (u, v),
        _ => {
            let mean = g_bar.sum() / (n * n) as f64;
            let scale = (mean.max(1e-6) / k as f64).sqrt();
            (
                DMatrix::from_fn(n, k, |_, _| scale * (1.0 - rng.random::<f64>())),
                DMatrix::from_fn(k, n, |_, _| scale * (1.0 - rng.random::<f64>())),
            )
        }
    };

    let mut prev = guide_objective(long_seq, r, &u, &v);
    for _ in 0..hp.max_iter {
        let num_u = &g_bar * v.transpose();
        let den_u = &u * (&v * v.transpose());
        u = multiplicative_step(&u, &num_u, &den_u, hp.delta_guard);
        let num_v = u.transpose() * &g_bar;
        let den_v = (u.transpose() * &u) * &v;
        v = multiplicative_step(&v, &num_v, &den_v, hp.delta_guard);
        let cur = guide_objective(long_seq, r, &u, &v);
        let rel = if prev == 0.0 { 0.0 } else { (prev - cur).abs() / prev };
        prev = cur;
        if rel < hp.epsilon {
            break;
        }
    }
    Ok(LongTermGuide { u_lt: u, v_lt: v, r: r.clone() })
}

/// Alternating multiplicative optimization over the short window: for each
/// timestamp update `U_t` then `V_t` with the freshest values, then `A`,
/// `B`, `C`. Stops when the relative loss change drops below `hp.epsilon`
/// or after `hp.max_iter` sweeps. Returns the state and the per-iteration
/// total-loss trace (the first entry is the loss at the initial state).
pub fn fit<R: Rng>(
    seq: &GraphSequence,
    guide: &LongTermGuide,
    hp: &HyperParams,
    init: Option<LatentState>,
    rng: &mut R,
) -> Result<(LatentState, Vec<f64>)> {
    hp.validate()?;
    if seq.len() != hp.window {
        return Err(Error::ShapeMismatch {
            context: format!("sequence length {} vs window {}", seq.len(), hp.window),
        });
    }
    let mut state = match init {
        Some(s) => s,
        None => LatentState::random_init(seq, hp, rng),
    };
    let mut trace = vec![objective(seq, &state, guide, hp)?.total];
    for _ in 0..hp.max_iter {
        for t in 0..hp.window {
            update_u(&mut state, seq, guide, hp, t)?;
            update_v(&mut state, seq, guide, hp, t)?;
        }
        update_a(&mut state, guide, hp)?;
        update_b(&mut state, guide, hp)?;
        update_c(&mut state, seq, hp)?;
        let loss = objective(seq, &state, guide, hp)?.total;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss);
        }
        let prev = trace[trace.len() - 1];
        trace.push(loss);
        let rel = if prev == 0.0 { 0.0 } else { (prev - loss).abs() / prev };
        if rel < hp.epsilon {
            break;
        }
    }
    Ok((state, trace))
}

/// One-step prediction of the next weight matrix: `(U_T A) C (V_T B)`.
pub fn predict_next(state: &LatentState) -> DMatrix<f64> {
    let last = state.window() - 1;
    ((&state.u[last] * &state.a) * &state.c) * (&state.v[last] * &state.b)
}
