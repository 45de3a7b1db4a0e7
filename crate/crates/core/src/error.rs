use thiserror::Error;

use crate::estimators::EstimateReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite state at step {step} of {steps}")]
    NonFinite { step: usize, steps: usize },

    #[error("level cap of {max_level} exceeded before convergence")]
    MaxLevelExceeded { max_level: usize, partial: Box<EstimateReport> },

    #[error("level {level} requested {requested} samples, above the cap of {max_samples}")]
    MaxSamplesExceeded { level: usize, requested: u64, max_samples: u64, partial: Box<EstimateReport> },

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    /// Partial estimator output carried by cap violations.
    pub fn partial_report(&self) -> Option<&EstimateReport> {
        match self {
            Error::MaxLevelExceeded { partial, .. } | Error::MaxSamplesExceeded { partial, .. } => Some(partial),
            _ => None,
        }
    }
}
