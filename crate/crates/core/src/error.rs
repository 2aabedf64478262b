use thiserror::Error;

use crate::boltzmann::MAX_ENUM_UNITS;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("exact enumeration over {0} units exceeds the limit of {MAX_ENUM_UNITS}")]
    EnumerationTooLarge(usize),

    #[error("index {index} out of range for {len} units")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("logistic fit failed: residual rms {rms:.4} exceeds {limit}")]
    FitFailure { rms: f64, limit: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
