use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),

    #[error("integrator failed at t = {t}: {reason} (step size {step:e} after {steps} steps)")]
    Integrator {
        t: f64,
        step: f64,
        steps: usize,
        reason: String,
    },

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("validation failed: {0}")]
    Validation(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
