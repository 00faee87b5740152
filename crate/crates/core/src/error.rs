use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("mesh has no per-vertex colors; supply --synthetic-texture")]
    MissingColors,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("matrix is singular or indefinite (pivot {pivot:e} at row {row})")]
    Singular { row: usize, pivot: f64 },

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("hierarchy consistency violation: {0}")]
    Consistency(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical pipeline (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. } | Error::NoConvergence(_) | Error::NonFinite(_) | Error::Consistency(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
