use thiserror::Error;

/// Errors raised by the pricing engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PricingError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular tridiagonal system: pivot {pivot:e} at row {row}")]
    SingularSystem { row: usize, pivot: f64 },

    #[error(
        "real-root guard exhausted at tau = {tau}: step {step:e} fell below minimum {k_min:e}"
    )]
    GuardExhausted { tau: f64, step: f64, k_min: f64 },

    #[error("non-finite value in {field} at tau = {tau}")]
    NonFinite { field: &'static str, tau: f64 },

    #[error("invalid binomial probability {0}")]
    InvalidProbability(f64),
}

pub type Result<T> = std::result::Result<T, PricingError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> PricingError {
    PricingError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
