use thiserror::Error;

/// Errors shared by every solver in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("problem size exceeds budget: {0}")]
    Budget(String),
    #[error("no convergence: {message} (residual {residual:.3e})")]
    Convergence { message: String, residual: f64 },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("assertion failed: {0}")]
    Assertion(String),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(LabError::Input(msg.into()))
}
