//! Stochastic block model scenario generator with ground-truth labels.
//!
//! A scenario is a sequence of SBM draws whose generating configuration
//! switches permanently at each change point; hybrid scenarios additionally
//! contain event points where a deviation configuration applies for exactly
//! one step and then reverts.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphseq::{GraphSequence, GraphSnapshot, LabelSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmConfig {
    pub n: usize,
    /// Block sizes; must sum to n.
    pub blocks: Vec<usize>,
    /// Intra-block edge probability.
    pub p_in: f64,
    /// Inter-block edge probability.
    pub p_out: f64,
}

impl SbmConfig {
    pub fn equal_blocks(n: usize, count: usize, p_in: f64, p_out: f64) -> Self {
        let base = n / count;
        let rem = n % count;
        let blocks = (0..count).map(|i| base + usize::from(i < rem)).collect();
        Self { n, blocks, p_in, p_out }
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.iter().any(|&b| b == 0) {
            return Err(Error::InvalidConfig("block sizes must be positive".into()));
        }
        if self.blocks.iter().sum::<usize>() != self.n {
            return Err(Error::InvalidConfig("block sizes must sum to n".into()));
        }
        if !(0.0..=1.0).contains(&self.p_out)
            || !(0.0..=1.0).contains(&self.p_in)
            || self.p_out > self.p_in
        {
            return Err(Error::InvalidConfig("need 0 <= p_out <= p_in <= 1".into()));
        }
        Ok(())
    }

    fn membership(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n);
        for (b, &size) in self.blocks.iter().enumerate() {
            out.extend(std::iter::repeat(b).take(size));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Pure,
    Hybrid,
}

/// A timestamp at which a different generating configuration takes effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchPoint {
    pub t: i64,
    pub config: SbmConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub steps: usize,
    pub seed: u64,
    pub base: SbmConfig,
    /// Permanent regime switches.
    pub changes: Vec<SwitchPoint>,
    /// One-step deviations (hybrid only).
    #[serde(default)]
    pub events: Vec<SwitchPoint>,
}

/// Mean expected degree of an SBM draw.
pub fn expected_degree(cfg: &SbmConfig) -> f64 {
    let n = cfg.n as f64;
    cfg.blocks
        .iter()
        .map(|&s| {
            let s = s as f64;
            s * ((s - 1.0) * cfg.p_in + (n - s) * cfg.p_out)
        })
        .sum::<f64>()
        / n
}

/// Equal-block config whose p_in is chosen so the expected degree matches
/// `target_degree` at the given p_out. Keeping density constant across a
/// switch leaves only the community structure to change, so detection has to
/// read the structure rather than the edge count.
fn density_matched(n: usize, count: usize, p_out: f64, target_degree: f64) -> SbmConfig {
    let s = n as f64 / count as f64;
    let p_in = (target_degree - (n as f64 - s) * p_out) / (s - 1.0);
    SbmConfig::equal_blocks(n, count, p_in.clamp(p_out, 1.0), p_out)
}

/// Like [`density_matched`] but fixes p_in and solves for p_out.
fn density_matched_out(n: usize, count: usize, p_in: f64, target_degree: f64) -> SbmConfig {
    let s = n as f64 / count as f64;
    let p_out = (target_degree - (s - 1.0) * p_in) / (n as f64 - s);
    SbmConfig::equal_blocks(n, count, p_in, p_out.clamp(0.0, p_in))
}

impl ScenarioSpec {
    /// Default Pure scenario: 4 equal blocks with strong communities
    /// (p_in = 0.50, p_out = 0.02); each change point re-partitions the
    /// nodes between 4 and 2 blocks at the same expected degree.
    pub fn default_pure(n: usize, steps: usize, change_ts: &[i64], seed: u64) -> Self {
        let base = SbmConfig::equal_blocks(n, 4, 0.50, 0.02);
        let degree = expected_degree(&base);
        let changes = change_ts
            .iter()
            .enumerate()
            .map(|(i, &t)| SwitchPoint {
                t,
                config: if i % 2 == 0 {
                    density_matched(n, 2, 0.02, degree)
                } else {
                    base.clone()
                },
            })
            .collect();
        Self { kind: ScenarioKind::Pure, steps, seed, base, changes, events: Vec::new() }
    }

    /// Default Hybrid scenario: like the Pure default plus one-step events
    /// that soften the 4-block communities (p_in drops to 0.40, p_out rises
    /// to keep the expected degree).
    pub fn default_hybrid(
        n: usize,
        steps: usize,
        change_ts: &[i64],
        event_ts: &[i64],
        seed: u64,
    ) -> Self {
        let mut spec = Self::default_pure(n, steps, change_ts, seed);
        let degree = expected_degree(&spec.base);
        spec.kind = ScenarioKind::Hybrid;
        spec.events = event_ts
            .iter()
            .map(|&t| SwitchPoint { t, config: density_matched_out(n, 4, 0.40, degree) })
            .collect();
        spec
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        let in_range = |t: i64| t >= 0 && (t as usize) < self.steps;
        let mut change_ts = Vec::new();
        for c in &self.changes {
            c.config.validate()?;
            if !in_range(c.t) {
                return Err(Error::InvalidConfig(format!("change point {} out of range", c.t)));
            }
            if change_ts.contains(&c.t) {
                return Err(Error::InvalidConfig(format!("overlapping change points at {}", c.t)));
            }
            change_ts.push(c.t);
        }
        for e in &self.events {
            e.config.validate()?;
            if self.kind == ScenarioKind::Pure {
                return Err(Error::InvalidConfig("pure scenarios cannot contain events".into()));
            }
            if !in_range(e.t) {
                return Err(Error::InvalidConfig(format!("event point {} out of range", e.t)));
            }
            if change_ts.contains(&e.t) {
                return Err(Error::InvalidConfig(format!(
                    "event at {} collides with a change point",
                    e.t
                )));
            }
        }
        Ok(())
    }

    /// The configuration generating the snapshot at `t`.
    pub fn active_config(&self, t: i64) -> &SbmConfig {
        if let Some(e) = self.events.iter().find(|e| e.t == t) {
            return &e.config;
        }
        self.changes
            .iter()
            .filter(|c| c.t <= t)
            .max_by_key(|c| c.t)
            .map(|c| &c.config)
            .unwrap_or(&self.base)
    }
}

/// One undirected SBM draw: each intra-block pair carries an edge with
/// probability p_in, inter-block with p_out, weight 1 on sampled edges.
pub fn sample_snapshot<R: Rng>(cfg: &SbmConfig, t: i64, rng: &mut R) -> GraphSnapshot {
    let membership = cfg.membership();
    let n = cfg.n;
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if membership[i] == membership[j] { cfg.p_in } else { cfg.p_out };
            if rng.random::<f64>() < p {
                w[(i, j)] = 1.0;
                w[(j, i)] = 1.0;
            }
        }
    }
    GraphSnapshot::new(t, w, false)
}

/// Generates the scenario sequence and its label set.
pub fn generate(spec: &ScenarioSpec) -> Result<(GraphSequence, LabelSet)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut snapshots = Vec::with_capacity(spec.steps);
    for t in 0..spec.steps as i64 {
        snapshots.push(sample_snapshot(spec.active_config(t), t, &mut rng));
    }
    let labels = LabelSet {
        change_points: spec.changes.iter().map(|c| c.t).collect(),
        events: spec.events.iter().map(|e| e.t).collect(),
    };
    labels.validate()?;
    Ok((GraphSequence::new(snapshots)?, labels))
}

pub fn generate_pure(spec: &ScenarioSpec) -> Result<(GraphSequence, LabelSet)> {
    if spec.kind != ScenarioKind::Pure {
        return Err(Error::InvalidConfig("generate_pure requires a pure scenario".into()));
    }
    generate(spec)
}

pub fn generate_hybrid(spec: &ScenarioSpec) -> Result<(GraphSequence, LabelSet)> {
    if spec.kind != ScenarioKind::Hybrid {
        return Err(Error::InvalidConfig("generate_hybrid requires a hybrid scenario".into()));
    }
    generate(spec)
}
