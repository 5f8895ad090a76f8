use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported constellation order {0} (supported: 2, 4, 16, 64)")]
    UnsupportedOrder(usize),

    /// Exhaustive enumeration would exceed the configured limit.
    #[error("search space of {candidates:.3e} candidates exceeds limit {limit:.3e}; {hint}")]
    Infeasible {
        candidates: f64,
        limit: f64,
        hint: &'static str,
    },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("insufficient samples: need {needed}, have {have}")]
    InsufficientSamples { needed: usize, have: usize },

    #[error("code construction failed: {0}")]
    Construction(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, got })
        }
    }
}
