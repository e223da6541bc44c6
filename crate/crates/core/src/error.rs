use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A dense block Cholesky hit a non-positive pivot. `block_index` counts
    /// diagonal blocks from zero; the arrowhead tip has index `n_t`.
    #[error("matrix is not positive definite (diagonal block {block_index})")]
    NotPositiveDefinite { block_index: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("projection row {row} couples more than one time block")]
    BandwidthViolation { row: usize },

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("line search failed after {backtracks} trial steps")]
    LineSearchFailure { backtracks: usize },

    #[error("negative Hessian is not positive definite")]
    HessianNotPD,

    #[error("objective evaluation failed at the finite-difference stencil")]
    GradientFailure,

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown solver backend `{0}`")]
    UnknownBackend(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, err: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
