use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("world generation failed: {0}")]
    WorldGeneration(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("dialogue event rejected: {0}")]
    EventRejected(String),

    #[error("action mask fault: {0}")]
    MaskFault(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("checkpoint mismatch: {0}")]
    Checkpoint(String),

    #[error("non-finite gradient in `{0}`")]
    NonFinite(String),

    #[error("unsupported format version {found} in {what} (expected {expected})")]
    FormatVersion {
        what: &'static str,
        found: u32,
        expected: u32,
    },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
