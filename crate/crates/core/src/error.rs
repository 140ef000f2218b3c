use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("invalid format: {0}")]
    Format(String),

    #[error("truncated payload: {0}")]
    Truncated(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("missing embedding for id `{0}`")]
    MissingEmbedding(String),

    #[error("`{0}` is not mapped in the split assignment")]
    Unmapped(String),

    #[error("unknown concept `{0}`")]
    UnknownConcept(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value in batch {batch}: {what}")]
    NonFinite { batch: usize, what: String },

    #[error("invalid taxonomy: {0}")]
    Taxonomy(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
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
