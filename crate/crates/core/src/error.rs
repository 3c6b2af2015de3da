use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("time grid is not strictly increasing at index {index}")]
    NonIncreasingGrid { index: usize },

    #[error("{party} wealth {wealth} is not strictly positive")]
    NonPositiveWealth { party: &'static str, wealth: f64 },

    #[error("HARA utility evaluated at wealth + shift = {0}, which is not positive")]
    HaraDomain(f64),

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("root not bracketed on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("infeasible criterion: {0}")]
    Infeasible(String),

    #[error("portfolio rule failed on path {path} at step {step}: {reason}")]
    RuleFailure { path: usize, step: usize, reason: String },

    #[error("non-finite samples at path indices {0:?}")]
    NonFinite(Vec<usize>),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
