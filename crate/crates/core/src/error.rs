use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch between {left:?} and {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("{0}")]
    Contract(String),

    #[error("{0}")]
    Domain(String),

    #[error("{what}: empty input")]
    Empty { what: &'static str },

    #[error("segment {key}: field `{field}`: {message}")]
    Parse {
        key: String,
        field: String,
        message: String,
    },

    #[error("segment {key}: field `{field}` has dimension {found}, expected {expected}")]
    Schema {
        key: String,
        field: String,
        expected: usize,
        found: usize,
    },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("model spec: {0}")]
    Spec(String),

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

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Dimension {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
