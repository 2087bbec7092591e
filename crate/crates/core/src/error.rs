use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),

    #[error("step size must be positive, got {0}")]
    NonPositiveStep(f64),

    #[error("lambda = {lambda} is not in the resolvent set (growth rate {growth_rate})")]
    Spectrum { lambda: f64, growth_rate: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("non-finite integrand value at s = {time}, mark = {mark:?}")]
    NonFiniteIntegrand { time: f64, mark: Vec<f64> },

    #[error("non-finite jump integrand over mark region {region}")]
    NonFiniteMarkRegion { region: String },

    #[error("path {path} diverged at step {step} (t = {time}): state norm {norm:e}")]
    Divergence { path: usize, step: usize, time: f64, norm: f64 },

    #[error("coefficient validation failed: {0}")]
    Validation(String),

    #[error("empirical measures have different sizes ({left} vs {right})")]
    SizeMismatch { left: usize, right: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name: name.into(), reason: reason.into() }
    }
}
