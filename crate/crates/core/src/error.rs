use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
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

    #[error("no training data: {0}")]
    NoTrainingData(String),

    #[error("cannot corrupt: {0}")]
    CannotCorrupt(String),

    #[error("unknown synset `{0}`")]
    UnknownSynset(String),

    #[error("unknown relation index {0}")]
    UnknownRelation(usize),

    #[error("unknown word id {0}")]
    UnknownWord(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("zero-norm vector")]
    ZeroVector,

    #[error("training diverged at iteration {iteration}: non-finite {what} loss")]
    Diverged { iteration: usize, what: &'static str },

    #[error("non-finite {0} loss")]
    NonFiniteLoss(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("word `{0}` is not shared between the two embedding sides")]
    NotShared(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

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
