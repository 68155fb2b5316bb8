use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("layer {layer}: expected input width {expected}, got {got}")]
    Dimension {
        layer: usize,
        expected: usize,
        got: usize,
    },

    #[error("forward record does not belong to this network: {0}")]
    StaleForward(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown domain `{0}`")]
    UnknownDomain(String),

    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },

    #[error("class/domain pairs without samples: {0:?}")]
    MissingClass(Vec<(usize, usize)>),

    #[error("object {object} has no sample in domain {domain}")]
    MissingObject { object: i64, domain: usize },

    #[error("contrastive batch has no usable positive pair ({skipped} skipped)")]
    NoPositivePairs { skipped: usize },

    #[error("mismatch: {0}")]
    Mismatch(String),

    #[error("empty split: {0}")]
    EmptySplit(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
