//! Snapshot and sequence data model, ingestion, validation, and similarity
//! utilities shared by the rest of the library.
//!
//! A sequence is stored as dense non-negative weight matrices with a node
//! count that is constant across time. Node ids in input files may be
//! arbitrary strings; a deterministic sorted mapping to `0..n-1` is built
//! from the union over all snapshots, and snapshots missing a node get zero
//! rows/columns. Missing edges are weight 0.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// One timestamped weighted graph as an n-by-n non-negative weight matrix.
/// Entry `(i, j)` is the weight of the edge `i -> j`. Immutable after
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSnapshot {
    timestamp: i64,
    weights: DMatrix<f64>,
    directed: bool,
}

/// A violated snapshot invariant. Violations are data, not errors.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NegativeWeight { row: usize, col: usize, value: f64 },
    Asymmetric { row: usize, col: usize },
    NonFinite { row: usize, col: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NegativeWeight { row, col, value } => {
                write!(f, "negative weight {value} at ({row}, {col})")
            }
            Violation::Asymmetric { row, col } => {
                write!(f, "asymmetric at ({row}, {col}) with undirected flag")
            }
            Violation::NonFinite { row, col } => write!(f, "non-finite weight at ({row}, {col})"),
        }
    }
}

impl GraphSnapshot {
    pub fn new(timestamp: i64, weights: DMatrix<f64>, directed: bool) -> Self {
        assert_eq!(weights.nrows(), weights.ncols(), "weight matrix must be square");
        Self { timestamp, weights, directed }
    }

    pub fn timestamp(&self) -> i64 {
        self.timestamp
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn is_symmetric(&self) -> bool {
        let w = &self.weights;
        for i in 0..w.nrows() {
            for j in (i + 1)..w.ncols() {
                if w[(i, j)] != w[(j, i)] {
                    return false;
                }
            }
        }
        true
    }

    /// Lists every violated invariant; an empty list means the snapshot is ok.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let w = &self.weights;
        for i in 0..w.nrows() {
            for j in 0..w.ncols() {
                let v = w[(i, j)];
                if !v.is_finite() {
                    out.push(Violation::NonFinite { row: i, col: j });
                } else if v < 0.0 {
                    out.push(Violation::NegativeWeight { row: i, col: j, value: v });
                }
            }
        }
        if !self.directed {
            for i in 0..w.nrows() {
                for j in (i + 1)..w.ncols() {
                    if w[(i, j)] != w[(j, i)] {
                        out.push(Violation::Asymmetric { row: i, col: j });
                    }
                }
            }
        }
        out
    }
}

/// Ordered snapshots with a constant node count and contiguous timestamps.
/// Snapshots are reference-counted so windowing never copies weight data.
#[derive(Debug, Clone)]
pub struct GraphSequence {
    snapshots: Vec<Arc<GraphSnapshot>>,
    n: usize,
}

impl GraphSequence {
    pub fn new(snapshots: Vec<GraphSnapshot>) -> Result<Self> {
        Self::from_shared(snapshots.into_iter().map(Arc::new).collect())
    }

    pub fn from_shared(snapshots: Vec<Arc<GraphSnapshot>>) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::InvalidConfig("empty sequence".into()));
        }
        let n = snapshots[0].n();
        for s in &snapshots {
            if s.n() != n {
                return Err(Error::NodeCountMismatch { expected: n, got: s.n() });
            }
        }
        for pair in snapshots.windows(2) {
            if pair[1].timestamp() != pair[0].timestamp() + 1 {
                return Err(Error::InvalidConfig(format!(
                    "timestamps must be strictly increasing and contiguous: {} then {}",
                    pair[0].timestamp(),
                    pair[1].timestamp()
                )));
            }
        }
        Ok(Self { snapshots, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn first_timestamp(&self) -> i64 {
        self.snapshots[0].timestamp()
    }

    pub fn last_timestamp(&self) -> i64 {
        self.snapshots[self.snapshots.len() - 1].timestamp()
    }

    pub fn snapshots(&self) -> &[Arc<GraphSnapshot>] {
        &self.snapshots
    }

    pub fn get(&self, timestamp: i64) -> Result<&Arc<GraphSnapshot>> {
        let first = self.first_timestamp();
        if timestamp < first || timestamp > self.last_timestamp() {
            return Err(Error::MissingTimestamp { t: timestamp });
        }
        Ok(&self.snapshots[(timestamp - first) as usize])
    }

    /// Contiguous sub-sequence of `size` snapshots ending at `end`. Shares
    /// the underlying snapshot data.
    pub fn window(&self, end: i64, size: usize) -> Result<GraphSequence> {
        if size == 0 {
            return Err(Error::InvalidConfig("window size must be positive".into()));
        }
        let start = end - size as i64 + 1;
        if start < self.first_timestamp() || end > self.last_timestamp() {
            return Err(Error::InsufficientHistory { end, need: size, have: self.len() });
        }
        let first = self.first_timestamp();
        let lo = (start - first) as usize;
        let hi = (end - first) as usize;
        Ok(GraphSequence { snapshots: self.snapshots[lo..=hi].to_vec(), n: self.n })
    }
}

/// ||W_a - W_b||_F over equal-shape snapshots.
pub fn frobenius_distance(a: &GraphSnapshot, b: &GraphSnapshot) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::ShapeMismatch {
            context: format!("frobenius_distance: {} vs {}", a.n(), b.n()),
        });
    }
    Ok((a.weights() - b.weights()).norm())
}

/// Ground-truth carrier for synthetic scenarios: change points are persistent
/// regime shifts, events are one-step deviations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelSet {
    pub change_points: BTreeSet<i64>,
    pub events: BTreeSet<i64>,
}

impl LabelSet {
    pub fn validate(&self) -> Result<()> {
        if self.change_points.intersection(&self.events).next().is_some() {
            return Err(Error::InvalidConfig(
                "a timestamp cannot be both a change point and an event".into(),
            ));
        }
        Ok(())
    }
}

/// Input format of a sequence file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceFormat {
    /// Records are inserted exactly as listed; a snapshot is flagged
    /// undirected when its matrix turns out symmetric.
    EdgeList,
    /// Each record is stored on both (i, j) and (j, i); snapshots are
    /// flagged undirected.
    EdgeListUndirected,
}

struct RawRecord {
    t: i64,
    src: String,
    dst: String,
    weight: f64,
}

fn parse_line(line: &str, line_no: usize) -> Result<Option<RawRecord>> {
    let trimmed = line.trim();
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Ok(None);
    }
    let mut parts = trimmed.split(' ');
    let t = parts
        .next()
        .and_then(|s| s.parse::<i64>().ok())
        .ok_or_else(|| Error::Parse { line: line_no, msg: "bad timestamp field".into() })?;
    let src = parts
        .next()
        .ok_or_else(|| Error::Parse { line: line_no, msg: "missing source node".into() })?;
    let dst = parts
        .next()
        .ok_or_else(|| Error::Parse { line: line_no, msg: "missing destination node".into() })?;
    let weight = parts
        .next()
        .and_then(|s| s.parse::<f64>().ok())
        .ok_or_else(|| Error::Parse { line: line_no, msg: "bad weight field".into() })?;
    if parts.next().is_some() {
        return Err(Error::Parse { line: line_no, msg: "trailing fields".into() });
    }
    if !weight.is_finite() {
        return Err(Error::Parse { line: line_no, msg: "non-finite weight".into() });
    }
    if weight < 0.0 {
        return Err(Error::NegativeWeight { line: line_no, value: weight });
    }
    Ok(Some(RawRecord { t, src: src.to_string(), dst: dst.to_string(), weight }))
}

/// Sorted-order node id mapping: numeric when every id parses as an integer,
/// lexicographic otherwise. Keeps reloads of saved sequences (which use dense
/// indices) in their original order.
fn node_index(ids: &BTreeSet<String>) -> BTreeMap<String, usize> {
    let mut sorted: Vec<&String> = ids.iter().collect();
    if ids.iter().all(|s| s.parse::<i64>().is_ok()) {
        sorted.sort_by_key(|s| s.parse::<i64>().unwrap());
    }
    sorted.into_iter().cloned().enumerate().map(|(i, s)| (s, i)).collect()
}

fn assemble(
    records: Vec<RawRecord>,
    extra_timestamps: BTreeSet<i64>,
    format: SequenceFormat,
) -> Result<GraphSequence> {
    let mut ids = BTreeSet::new();
    let mut timestamps = extra_timestamps;
    for r in &records {
        ids.insert(r.src.clone());
        ids.insert(r.dst.clone());
        timestamps.insert(r.t);
    }
    if timestamps.is_empty() {
        return Err(Error::InvalidConfig("no records in input".into()));
    }
    let index = node_index(&ids);
    let n = index.len();
    let mut by_t: BTreeMap<i64, DMatrix<f64>> =
        timestamps.iter().map(|&t| (t, DMatrix::zeros(n, n))).collect();
    for r in records {
        let i = index[&r.src];
        let j = index[&r.dst];
        let w = by_t.get_mut(&r.t).unwrap();
        w[(i, j)] = r.weight;
        if format == SequenceFormat::EdgeListUndirected {
            w[(j, i)] = r.weight;
        }
    }
    let snapshots = by_t
        .into_iter()
        .map(|(t, w)| {
            let symmetric = {
                let probe = GraphSnapshot::new(t, w.clone(), true);
                probe.is_symmetric()
            };
            let directed = match format {
                SequenceFormat::EdgeList => !symmetric,
                SequenceFormat::EdgeListUndirected => false,
            };
            GraphSnapshot::new(t, w, directed)
        })
        .collect();
    GraphSequence::new(snapshots)
}

/// Loads a sequence from one edge-list file, or from a directory of
/// per-timestamp files named `t<index>.edges`.
pub fn load_sequence(path: &Path, format: SequenceFormat) -> Result<GraphSequence> {
    let mut records = Vec::new();
    let mut extra = BTreeSet::new();
    if path.is_dir() {
        let mut files: Vec<_> = fs::read_dir(path)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().map(|e| e == "edges").unwrap_or(false))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::InvalidConfig(format!("no .edges files in {}", path.display())));
        }
        for file in files {
            if let Some(stem) = file.file_stem().and_then(|s| s.to_str()) {
                if let Some(t) = stem.strip_prefix('t').and_then(|s| s.parse::<i64>().ok()) {
                    extra.insert(t);
                }
            }
            read_records(&file, &mut records)?;
        }
    } else {
        read_records(path, &mut records)?;
    }
    assemble(records, extra, format)
}

fn read_records(path: &Path, out: &mut Vec<RawRecord>) -> Result<()> {
    let text = fs::read_to_string(path)?;
    for (i, line) in text.lines().enumerate() {
        if let Some(rec) = parse_line(line, i + 1)? {
            out.push(rec);
        }
    }
    Ok(())
}

/// Writes a sequence as one edge-list file with dense node indices. Every
/// non-zero entry is written, so `load_sequence` round-trips the weights.
pub fn save_sequence(seq: &GraphSequence, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "# t src dst weight")?;
    for snap in seq.snapshots() {
        let w = snap.weights();
        let mut any = false;
        for i in 0..w.nrows() {
            for j in 0..w.ncols() {
                if w[(i, j)] != 0.0 {
                    writeln!(f, "{} {} {} {}", snap.timestamp(), i, j, w[(i, j)])?;
                    any = true;
                }
            }
        }
        if !any {
            // keep empty snapshots representable: self-loop of weight 0 is
            // not expressible, so fall back to a comment marker plus a zero
            // record on node 0
            writeln!(f, "{} 0 0 0", snap.timestamp())?;
        }
    }
    Ok(())
}

/// Sidecar label file: `<t> change` or `<t> event` per line.
pub fn load_labels(path: &Path) -> Result<LabelSet> {
    let text = fs::read_to_string(path)?;
    let mut labels = LabelSet::default();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split(' ');
        let t = parts
            .next()
            .and_then(|s| s.parse::<i64>().ok())
            .ok_or_else(|| Error::Parse { line: i + 1, msg: "bad timestamp".into() })?;
        match parts.next() {
            Some("change") => {
                labels.change_points.insert(t);
            }
            Some("event") => {
                labels.events.insert(t);
            }
            other => {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected 'change' or 'event', got {other:?}"),
                })
            }
        }
    }
    labels.validate()?;
    Ok(labels)
}

pub fn save_labels(labels: &LabelSet, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    for t in &labels.change_points {
        writeln!(f, "{t} change")?;
    }
    for t in &labels.events {
        writeln!(f, "{t} event")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn snap(t: i64, w: DMatrix<f64>) -> GraphSnapshot {
        GraphSnapshot::new(t, w, false)
    }

    #[test]
    fn load_two_snapshot_edge_list() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seq.edges");
        fs::write(&path, "0 0 1 1.0\n0 1 0 1.0\n1 1 2 2.5\n1 2 1 2.5\n").unwrap();
        let seq = load_sequence(&path, SequenceFormat::EdgeList).unwrap();
        assert_eq!(seq.len(), 2);
        assert_eq!(seq.n(), 3);
        assert!(!seq.snapshots()[0].is_directed());
    }

    #[test]
    fn negative_weight_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seq.edges");
        fs::write(&path, "0 0 1 1.0\n0 1 2 -1.0\n").unwrap();
        let err = load_sequence(&path, SequenceFormat::EdgeList).unwrap_err();
        match err {
            Error::NegativeWeight { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn node_count_mismatch_at_construction() {
        let a = snap(0, DMatrix::zeros(5, 5));
        let b = snap(1, DMatrix::zeros(7, 7));
        let err = GraphSequence::new(vec![a, b]).unwrap_err();
        assert!(matches!(err, Error::NodeCountMismatch { expected: 5, got: 7 }));
    }

    #[test]
    fn union_node_space_pads_missing_nodes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seq.edges");
        // second snapshot mentions a node absent from the first
        fs::write(&path, "0 a b 1\n1 a c 1\n").unwrap();
        let seq = load_sequence(&path, SequenceFormat::EdgeList).unwrap();
        assert_eq!(seq.n(), 3);
        assert_eq!(seq.snapshots()[0].weights()[(0, 2)], 0.0);
    }

    #[test]
    fn window_basics() {
        let snaps: Vec<_> = (0..151).map(|t| snap(t, DMatrix::zeros(2, 2))).collect();
        let seq = GraphSequence::new(snaps).unwrap();
        let w = seq.window(12, 3).unwrap();
        let ts: Vec<i64> = w.snapshots().iter().map(|s| s.timestamp()).collect();
        assert_eq!(ts, vec![10, 11, 12]);

        let single = seq.window(5, 1).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single.last_timestamp(), 5);

        assert!(matches!(seq.window(1, 3), Err(Error::InsufficientHistory { .. })));
    }

    #[test]
    fn frobenius_examples() {
        let a = snap(0, dmatrix![1.0, 0.0; 0.0, 0.0]);
        let b = snap(0, dmatrix![0.0, 0.0; 0.0, 1.0]);
        assert_eq!(frobenius_distance(&a, &a).unwrap(), 0.0);
        assert!((frobenius_distance(&a, &b).unwrap() - 2f64.sqrt()).abs() < 1e-12);

        let unit = snap(0, dmatrix![0.6, 0.0; 0.0, 0.8]);
        let twice = snap(0, unit.weights() * 2.0);
        assert!((frobenius_distance(&twice, &unit).unwrap() - 1.0).abs() < 1e-12);

        let small = snap(0, DMatrix::zeros(3, 3));
        assert!(frobenius_distance(&a, &small).is_err());
    }

    #[test]
    fn validate_reports_violations() {
        let ok = snap(0, dmatrix![0.0, 1.0; 1.0, 0.0]);
        assert!(ok.validate().is_empty());

        let asym = snap(0, dmatrix![0.0, 1.0; 2.0, 0.0]);
        assert!(asym.validate().iter().any(|v| matches!(v, Violation::Asymmetric { .. })));

        let neg = snap(0, dmatrix![0.0, -0.5; -0.5, 0.0]);
        assert!(neg.validate().iter().any(|v| matches!(v, Violation::NegativeWeight { .. })));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.edges");
        let snaps = vec![
            snap(0, dmatrix![0.0, 1.25; 1.25, 0.0]),
            snap(1, dmatrix![0.0, 0.5; 0.5, 3.0]),
        ];
        let seq = GraphSequence::new(snaps).unwrap();
        save_sequence(&seq, &path).unwrap();
        let back = load_sequence(&path, SequenceFormat::EdgeList).unwrap();
        assert_eq!(back.len(), seq.len());
        for (a, b) in seq.snapshots().iter().zip(back.snapshots()) {
            assert_eq!(a.weights(), b.weights());
        }
    }

    #[test]
    fn labels_round_trip_and_disjointness() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.txt");
        let mut labels = LabelSet::default();
        labels.change_points.insert(50);
        labels.events.insert(80);
        save_labels(&labels, &path).unwrap();
        assert_eq!(load_labels(&path).unwrap(), labels);

        let mut bad = labels.clone();
        bad.events.insert(50);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn directory_of_snapshot_files() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("t0.edges"), "0 0 1 1\n0 1 0 1\n").unwrap();
        fs::write(dir.path().join("t1.edges"), "1 0 1 2\n1 1 0 2\n").unwrap();
        let seq = load_sequence(dir.path(), SequenceFormat::EdgeList).unwrap();
        assert_eq!(seq.len(), 2);
        assert_eq!(seq.snapshots()[1].weights()[(0, 1)], 2.0);
    }
}
