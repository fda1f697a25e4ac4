use std::path::PathBuf;

use crate::mean::MeanResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not positive definite (min eigenvalue {min_eigenvalue:e}, tolerance {tolerance:e})")]
    NotPositiveDefinite { min_eigenvalue: f64, tolerance: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("tangent vector is based at a different point")]
    BasePointMismatch,

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error(
        "Riemannian mean did not converge after {} iterations (gradient norm {:e})",
        .last.iterations,
        .last.final_gradient_norm
    )]
    DidNotConverge { last: Box<MeanResult> },

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("domain `{domain}` has no labels")]
    MissingLabels { domain: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("verification failed: {0}")]
    VerificationFailed(String),

    #[error("{path}: malformed file: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the command-line front end. Each error class
    /// maps to a distinct non-zero code.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::InvalidParameter(_) | Error::NotPositiveDefinite { .. } => 2,
            Error::DimensionMismatch { .. } | Error::BasePointMismatch => 3,
            Error::DidNotConverge { .. } => 4,
            Error::Io { .. } => 5,
            Error::Format { .. } => 6,
            Error::EmptyInput(_) => 7,
            Error::DegenerateLabels(_) | Error::MissingLabels { .. } => 8,
            Error::VerificationFailed(_) => 9,
        }
    }
}
