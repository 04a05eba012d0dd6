use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("too few observations: need at least {needed}, got {got}")]
    TooFewObservations { needed: usize, got: usize },

    #[error("series too short: need more than {needed} observations, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("lag {lag} out of range for a series of length {n}")]
    LagOutOfRange { lag: usize, n: usize },

    #[error("non-positive value {value} at index {index}")]
    NonPositiveValue { index: usize, value: f64 },

    #[error("non-finite value at index {index}")]
    NonFiniteValue { index: usize },

    #[error("timestamps must be strictly increasing (violated at index {index})")]
    UnorderedTimestamps { index: usize },

    #[error("design matrix is rank deficient (column {column})")]
    RankDeficient { column: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported regression specification {0:?} (expected \"c\" or \"ct\")")]
    UnsupportedSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("window too short: need at least 2 values, got {0}")]
    WindowTooShort(usize),

    #[error("loss became non-finite at epoch {epoch}; the learning rate is probably too high")]
    NonFiniteLoss { epoch: usize },

    #[error("every candidate lag was infeasible")]
    AllLagsSkipped,

    #[error("every batch size failed to train")]
    AllBatchSizesFailed,

    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("parse error at row {row}: {reason}")]
    ParseError { row: usize, reason: String },

    #[error("duplicate date {date} at row {row}")]
    DuplicateDate { row: usize, date: String },

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
