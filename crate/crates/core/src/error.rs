use thiserror::Error;

/// Errors raised by the simulation building blocks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch for {what}: expected {expected}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("frame is in the {actual} domain, expected {expected}")]
    WrongDomain {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("ragged block grid: {0}")]
    RaggedGrid(String),

    #[error("normal matrix is rank deficient ({0})")]
    RankDeficient(String),

    #[error("channel has no nonzero rows to sample")]
    AllRowsZero,

    #[error("cannot normalize a zero precoder")]
    ZeroPrecoder,

    #[error("index {index} out of range for {what} (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("noise power must be positive, got {0}")]
    NonPositiveNoise(f64),

    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
