use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum GanError {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape { context: &'static str, expected: String, got: String },

    #[error("{context}: input contains non-finite values")]
    NonFiniteInput { context: &'static str },

    #[error("non-finite {what} at epoch {epoch}, step {step}: {value}")]
    NonFinite { what: String, epoch: usize, step: u64, value: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint {path}: {msg}")]
    Checkpoint { path: PathBuf, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] ivus_core::Error),
}

pub type Result<T, E = GanError> = std::result::Result<T, E>;

impl GanError {
    pub(crate) fn shape(context: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        GanError::Shape { context, expected: expected.to_string(), got: got.to_string() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GanError::Io { path: path.into(), source }
    }
}
