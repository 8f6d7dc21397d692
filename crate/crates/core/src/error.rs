use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("gap hypothesis violated: {0}")]
    GapViolation(String),

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("Newton iteration did not converge at point ({0}, {1}, {2})")]
    NewtonDiverged(f64, f64, f64),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
