use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("splat header line {line}: {message}")]
    Header { line: usize, message: String },

    #[error("unsupported splat layout: {0}")]
    UnsupportedLayout(String),

    #[error("splat body truncated at byte offset {offset} (expected {expected} bytes)")]
    Truncated { offset: usize, expected: usize },

    #[error("empty scene")]
    EmptyScene,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("label binding failed: {0}")]
    Binding(String),

    #[error("scene has no joint labels bound; call bind_labels first")]
    UnboundLabels,

    #[error("invalid transform: {0}")]
    InvalidTransform(String),

    #[error("transform decomposition failed: {0}")]
    Decomposition(String),

    #[error("merge failed: {0}")]
    Merge(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("alignment failed: {0}")]
    Alignment(String),

    #[error("non-finite photometric residual")]
    NonFiniteResidual,

    #[error("parse error in {source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("image error: {0}")]
    Image(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(source_name: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }
}
