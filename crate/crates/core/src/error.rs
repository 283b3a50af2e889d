use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}: {message}")]
    InvalidRow { row: usize, message: String },

    #[error("row {row}: duplicate session_index {session_index} for learner `{learner_id}` (first seen at row {first_row})")]
    DuplicateSession {
        row: usize,
        first_row: usize,
        learner_id: String,
        session_index: u32,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed encoding at position {position}: {message}")]
    MalformedEncoding { position: usize, message: String },

    #[error("warping window {window} cannot connect sequences of length {m} and {n}")]
    WindowTooSmall { window: usize, m: usize, n: usize },

    #[error("undefined statistic: {0}")]
    Undefined(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
