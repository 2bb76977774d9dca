//! End-to-end detection: per-timestamp fit, predict, score, flag, with
//! sliding-window warm starts.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphseq::{GraphSequence, GraphSnapshot};
use crate::lemcore::{
    adaptive_weights, fit, fit_longterm, predict_next, HyperParams, LatentState, LongTermGuide,
};
use crate::spectral::{
    combine_score, laplacian_directed, laplacian_undirected, normal_pattern, score_z1, score_z2,
    spectrum, spectrum_flagged, SpectrumSignature,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LaplacianMode {
    #[default]
    Auto,
    Undirected,
    Directed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub hp: HyperParams,
    /// Trade-off between the prediction score Z1 and the normal-pattern
    /// score Z2.
    pub alpha: f64,
    /// Flag cutoff on Z.
    pub threshold: f64,
    pub laplacian: LaplacianMode,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            hp: HyperParams::default(),
            alpha: 0.2,
            threshold: 0.5,
            laplacian: LaplacianMode::Auto,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        self.hp.validate()?;
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!("alpha out of [0,1]: {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidConfig(format!("threshold out of [0,1]: {}", self.threshold)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyRecord {
    pub timestamp: i64,
    pub z1: f64,
    pub z2: f64,
    pub z: f64,
    pub flagged: bool,
    /// Final total loss of the window fit.
    pub final_loss: f64,
    /// Number of sweeps the window fit performed.
    pub iterations: usize,
    /// Whether any spectral signature needed Perron-vector teleportation.
    pub perturbed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub records: Vec<AnomalyRecord>,
    pub config: DetectorConfig,
    pub seed: u64,
}

/// Resolves `Auto` against the data: undirected when every snapshot is
/// symmetric, directed otherwise.
pub fn resolve_mode(seq: &GraphSequence, mode: LaplacianMode) -> LaplacianMode {
    match mode {
        LaplacianMode::Auto => {
            if seq.snapshots().iter().all(|s| s.is_symmetric()) {
                LaplacianMode::Undirected
            } else {
                LaplacianMode::Directed
            }
        }
        other => other,
    }
}

/// Spectrum signature of one snapshot under the given Laplacian mode.
pub fn snapshot_signature(snap: &GraphSnapshot, mode: LaplacianMode) -> Result<SpectrumSignature> {
    match mode {
        LaplacianMode::Undirected => Ok(spectrum(&laplacian_undirected(snap))),
        LaplacianMode::Directed => {
            let (l, perturbed) = laplacian_directed(snap)?;
            Ok(spectrum_flagged(&l, perturbed))
        }
        LaplacianMode::Auto => {
            if snap.is_symmetric() {
                snapshot_signature(snap, LaplacianMode::Undirected)
            } else {
                snapshot_signature(snap, LaplacianMode::Directed)
            }
        }
    }
}

/// Shifts a fitted state one step forward for warm-starting the next window:
/// factors move down one slot, the vacated last slot starts from the
/// previous last factors, and `A`, `B`, `C` carry over.
pub fn warm_shift(state: &LatentState) -> LatentState {
    let mut u: Vec<DMatrix<f64>> = state.u[1..].to_vec();
    u.push(state.u[state.u.len() - 1].clone());
    let mut v: Vec<DMatrix<f64>> = state.v[1..].to_vec();
    v.push(state.v[state.v.len() - 1].clone());
    LatentState { u, v, c: state.c.clone(), a: state.a.clone(), b: state.b.clone() }
}

/// One detection step for the snapshot at `t_next`: fits the short window
/// ending at `t_next - 1` guided by the long window, predicts the next
/// network, and scores the actual snapshot against the prediction and the
/// normal pattern. `warm` carries the previous step's fitted state and guide
/// factors to seed both optimizations.
pub fn detect_step<R: Rng>(
    seq: &GraphSequence,
    t_next: i64,
    cfg: &DetectorConfig,
    warm: Option<(LatentState, LongTermGuide)>,
    rng: &mut R,
) -> Result<(AnomalyRecord, LatentState, LongTermGuide)> {
    cfg.validate()?;
    let hp = &cfg.hp;
    let long = seq.window(t_next - 1, hp.long_window())?;
    let short = seq.window(t_next - 1, hp.window)?;
    let actual = seq.get(t_next)?;
    let mode = resolve_mode(seq, cfg.laplacian);

    let (warm_state, warm_guide) = match warm {
        Some((s, g)) => (Some(s), Some((g.u_lt, g.v_lt))),
        None => (None, None),
    };
    let r = adaptive_weights(&long)?;
    let guide = fit_longterm(&long, &r, hp, warm_guide, rng)?;
    let (state, trace) = fit(&short, &guide, hp, warm_state, rng)?;

    let mut predicted = predict_next(&state);
    if mode == LaplacianMode::Undirected {
        // the factors carry no symmetry constraint; fold the prediction back
        // onto the symmetric cone before building its Laplacian
        predicted = (&predicted + predicted.transpose()) * 0.5;
    }
    let predicted_snap =
        GraphSnapshot::new(t_next, predicted, mode == LaplacianMode::Directed);

    let window_sigs: Vec<SpectrumSignature> = short
        .snapshots()
        .iter()
        .map(|s| snapshot_signature(s, mode))
        .collect::<Result<_>>()?;
    let sigma_nor = normal_pattern(&window_sigs)?;
    let sigma_a = snapshot_signature(actual, mode)?;
    let sigma_p = snapshot_signature(&predicted_snap, mode)?;

    let z1 = score_z1(&sigma_p, &sigma_a);
    let z2 = score_z2(&sigma_nor, &sigma_a);
    let z = combine_score(z1, z2, cfg.alpha)?;
    let perturbed =
        sigma_nor.perturbed || sigma_a.perturbed || sigma_p.perturbed;
    let record = AnomalyRecord {
        timestamp: t_next,
        z1,
        z2,
        z,
        flagged: z >= cfg.threshold,
        final_loss: *trace.last().unwrap(),
        iterations: trace.len() - 1,
        perturbed,
    };
    Ok((record, state, guide))
}

/// Runs [`detect_step`] over every admissible timestamp, threading the
/// warm-started state. The first `long_window + 1` timestamps produce no
/// record. Deterministic given the seed.
pub fn detect_sequence(seq: &GraphSequence, cfg: &DetectorConfig, seed: u64) -> Result<AnomalyReport> {
    cfg.validate()?;
    let long = cfg.hp.long_window();
    if seq.len() <= long + 1 {
        return Err(Error::InsufficientHistory {
            end: seq.last_timestamp(),
            need: long + 2,
            have: seq.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = seq.first_timestamp() + long as i64 + 1;
    let mut records = Vec::new();
    let mut warm: Option<(LatentState, LongTermGuide)> = None;
    for t_next in first..=seq.last_timestamp() {
        let (record, state, guide) = detect_step(seq, t_next, cfg, warm.take(), &mut rng)?;
        records.push(record);
        warm = Some((warm_shift(&state), guide));
    }
    Ok(AnomalyReport { records, config: *cfg, seed })
}

/// Timestamps of the K largest scores; ties broken by earlier timestamp.
pub fn rank_topk(report: &AnomalyReport, k: usize) -> Result<Vec<i64>> {
    if k > report.records.len() {
        return Err(Error::InvalidConfig(format!(
            "K = {k} exceeds report length {}",
            report.records.len()
        )));
    }
    let mut ranked: Vec<&AnomalyRecord> = report.records.iter().collect();
    ranked.sort_by(|a, b| {
        b.z.partial_cmp(&a.z).unwrap().then(a.timestamp.cmp(&b.timestamp))
    });
    Ok(ranked[..k].iter().map(|r| r.timestamp).collect())
}

/// Timestamps with `z >= threshold`.
pub fn flag_threshold(report: &AnomalyReport, threshold: f64) -> Vec<i64> {
    report
        .records
        .iter()
        .filter(|r| r.z >= threshold)
        .map(|r| r.timestamp)
        .collect()
}

impl AnomalyReport {
    /// CSV with header `t,z1,z2,z,flagged`, scores to 6 decimal places.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,z1,z2,z,flagged\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{}\n",
                r.timestamp, r.z1, r.z2, r.z, r.flagged
            ));
        }
        out
    }

    /// JSON variant including the config echo and seed.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}
