//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

/// Diagnostic payload attached to a non-finite loss abort.
#[derive(Debug, Clone, serde::Serialize)]
pub struct NanDump {
    pub epoch: usize,
    pub batch_index: usize,
    pub video_indices: Vec<usize>,
    pub l_bce: f64,
    pub l_reg: f64,
    pub l_mono: f64,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("frame index {index} out of range for sequence of {len} frames")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid sequence: {0}")]
    InvalidSequence(String),

    #[error("no pairs sampled")]
    NoPairs,

    #[error("sequence shorter than minimum offset")]
    SequenceTooShort,

    #[error("empty negative clip set")]
    NoNegatives,

    #[error("labeling strategy requires an onset index")]
    MissingOnset,

    #[error("scorer/tape mismatch: {0}")]
    TapeMismatch(String),

    #[error("non-finite loss at epoch {} batch {} (bce={}, reg={}, mono={})",
            .0.epoch, .0.batch_index, .0.l_bce, .0.l_reg, .0.l_mono)]
    NonFiniteLoss(NanDump),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("dataset hash mismatch: checkpoint was trained against {expected}, got {actual} (pass --force to evaluate anyway)")]
    DatasetHashMismatch { expected: String, actual: String },

    #[error("invalid command line")]
    Usage,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
