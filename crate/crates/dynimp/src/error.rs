//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, DynImpError>;

#[derive(Debug, Error)]
pub enum DynImpError {
    #[error("malformed row at line {line}: {msg}")]
    MalformedRow { line: usize, msg: String },

    #[error("unknown label `{label}`; known labels: {known}")]
    UnknownLabel { label: String, known: String },

    #[error("dataset too small: need at least {needed} frames, got {got}")]
    EmptyDataset { needed: usize, got: usize },

    #[error("feature `{0}` has no observed cells")]
    NoObservedCells(String),

    #[error("window has no observed cells")]
    EmptyWindow,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("class {0} absent from training set")]
    MissingClass(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("loss has zero included cells")]
    EmptyLossSupport,

    #[error("gradient check: {0}")]
    GradCheck(String),

    #[error("unscaled input: observed cell at ({t}, {f}) = {value} is outside [0, 1]")]
    UnscaledInput { t: usize, f: usize, value: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("unsupported format version `{0}`")]
    FormatVersion(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl DynImpError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        DynImpError::Io {
            path: path.into(),
            source,
        }
    }
}
