use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
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

    #[error("{path}:{line}: duplicate verse id {id}")]
    DuplicateVerseId {
        path: PathBuf,
        line: usize,
        id: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("model file is not in the expected format: {0}")]
    BadFormat(String),

    #[error("unsupported model file version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("model file is truncated")]
    Truncated,

    #[error("tensor {name}: header says {expected:?}, found {found:?}")]
    DimensionMismatch {
        name: String,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
