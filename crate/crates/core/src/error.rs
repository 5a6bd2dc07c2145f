use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown entity id {0}")]
    UnknownEntity(u32),

    #[error("unknown relation id {0}")]
    UnknownRelation(u32),

    #[error("unknown entity name `{0}`")]
    UnknownEntityName(String),

    #[error("unknown relation name `{0}`")]
    UnknownRelationName(String),

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("illegal action: {0}")]
    IllegalAction(String),

    #[error("episode is not terminal")]
    NotTerminal,

    #[error("episode already terminal")]
    AlreadyTerminal,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("{0}")]
    Empty(&'static str),

    #[error("dataset mismatch: `{0}` vs `{1}`")]
    DatasetMismatch(String, String),

    #[error("config: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
