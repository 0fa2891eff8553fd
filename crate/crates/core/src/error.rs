use thiserror::Error;

/// Errors raised by the geometry kernel, sampler, forest and statistics layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported dimension {0}: operation is only defined for d = 1")]
    UnsupportedDimension(usize),

    #[error("refusing to sample: expected point count {expected:.3e} exceeds cap {cap:.3e}")]
    TooManyPoints { expected: f64, cap: f64 },

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
