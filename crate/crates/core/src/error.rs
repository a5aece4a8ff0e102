use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad input shape or out-of-range argument.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A distribution, kernel or field description violates its invariants.
    #[error("validation failed: {0}")]
    Validation(String),

    /// A kernel was evaluated on its singular diagonal.
    #[error("kernel is singular at coincident points {0}")]
    Singularity(String),

    #[error("unsupported kernel: {0}")]
    UnsupportedKernel(String),

    /// Factorization or quadrature breakdown.
    #[error("numerical failure: {message} (smallest eigenvalue estimate {min_eigenvalue:?})")]
    Numerical {
        message: String,
        min_eigenvalue: Option<f64>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical { .. })
    }
}
