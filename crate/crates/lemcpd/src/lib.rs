//! Change point detection in time-varying weighted graphs via a latent
//! evolution model.
//!
//! The pipeline factorizes each graph snapshot in a sliding window as
//! `G_t ~ U_t C V_t`, learns transition matrices that carry the factors
//! forward in time together with long-window guide matrices, predicts the
//! next snapshot, and scores it against both the prediction and the average
//! spectral pattern of the window using Laplacian singular-value signatures.

pub mod bench;
pub mod detector;
pub mod error;
pub mod graphseq;
pub mod lemcore;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
pub use graphseq::{GraphSequence, GraphSnapshot, LabelSet};
pub use lemcore::{HyperParams, LatentState, LongTermGuide};
pub use detector::{AnomalyRecord, AnomalyReport, DetectorConfig, LaplacianMode};
