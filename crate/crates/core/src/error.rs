use std::path::PathBuf;

use crate::imaging::TissueClass;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-finite pixel value {value} at (row {row}, col {col})")]
    NonFinite { row: usize, col: usize, value: f64 },

    #[error("image has no finite pixels")]
    NoFinitePixels,

    #[error("invalid dimensions: {0}")]
    Dims(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("annotation rejected: {0}")]
    Annotation(String),

    #[error("tissue region {0} is empty")]
    EmptyRegion(TissueClass),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format { path: path.into(), msg: msg.into() }
    }
}
