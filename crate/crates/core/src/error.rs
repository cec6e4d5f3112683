use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mode {mode} out of range for a tensor of order {order}")]
    InvalidMode { mode: usize, order: usize },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("capacity error: {0}")]
    Capacity(String),

    /// A cache or gradient list does not belong to the layer/network it is used with.
    #[error("state error: {0}")]
    State(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("length error: {0}")]
    Length(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
