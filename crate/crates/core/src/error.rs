use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the model's domain (bad coordinates, empty keyword set, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// An internal structural invariant does not hold.
    #[error("invariant violated: {0}")]
    Invariant(String),

    /// Bad configuration or command-line usage.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("parse error at {path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
