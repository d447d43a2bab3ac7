use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("covariance is not positive semidefinite: {0}")]
    NotPsd(String),

    #[error("cholesky factorisation failed after jitter escalation to {jitter:e}")]
    Cholesky { jitter: f64 },

    #[error("newton iterations did not converge after {iterations} steps (gradient norm {grad_norm:e})")]
    NoConvergence { iterations: usize, grad_norm: f64 },

    #[error("hessian indefinite beyond jitter budget")]
    IndefiniteHessian,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures caused by the numerics rather than by user input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPsd(_) | Error::Cholesky { .. } | Error::NoConvergence { .. } | Error::IndefiniteHessian
        )
    }
}
