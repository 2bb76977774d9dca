use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("negative weight at line {line}: {value}")]
    NegativeWeight { line: usize, value: f64 },

    #[error("node count mismatch: expected {expected}, got {got}")]
    NodeCountMismatch { expected: usize, got: usize },

    #[error("shape mismatch: {context}")]
    ShapeMismatch { context: String },

    #[error("insufficient history: need {need} snapshots ending at t={end}, have {have}")]
    InsufficientHistory { end: i64, need: usize, have: usize },

    #[error("timestamp {t} not found in sequence")]
    MissingTimestamp { t: i64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite loss encountered (numerical blow-up)")]
    NonFiniteLoss,

    #[error("power iteration failed to converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
