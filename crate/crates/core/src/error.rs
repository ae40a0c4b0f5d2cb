use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not symmetric positive definite ({0})")]
    NotPositiveDefinite(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dense eigensolver refused dimension {dim} (limit {limit}); use the Lanczos path")]
    DenseLimitExceeded { dim: usize, limit: usize },

    #[error("operation requires exact spatial factorizations (diagnostic mode)")]
    DiagnosticModeRequired,

    #[error("solver diverged at iteration {iteration}: residual grew by a factor {growth:.3e}")]
    Diverged { iteration: usize, growth: f64 },

    #[error("preconditioner is not positive definite (inner product {0:.3e})")]
    IndefinitePreconditioner(f64),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
