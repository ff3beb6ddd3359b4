use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Extents of paired legs or operands disagree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// The caller violated a documented precondition.
    #[error("invalid usage: {0}")]
    Usage(String),

    /// A non-finite scalar reached a constructor.
    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },

    /// An iterative procedure stopped before reaching its tolerance.
    #[error("no convergence after {iterations} iterations (best residual {best_residual:.3e}): {context}")]
    Convergence {
        context: String,
        iterations: usize,
        best_residual: f64,
    },

    /// The requested problem exceeds a hard size cap.
    #[error("resource limit: {0}")]
    Resource(String),

    /// A LAPACK routine reported failure.
    #[error("LAPACK {routine} failed with info = {info}")]
    Lapack { routine: String, info: i32 },

    /// Snapshot or table payload could not be decoded.
    #[error("format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },

    /// A consistency check between two computations failed.
    #[error("internal consistency: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    /// Whether the error reflects bad input rather than a numerical failure.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Usage(_) | Error::Dimension(_) | Error::Resource(_))
    }
}
