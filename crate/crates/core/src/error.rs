use std::path::PathBuf;

/// Error type shared across the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error in {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("missing asset: {0}")]
    MissingAsset(PathBuf),

    #[error("invalid {field}: {msg}")]
    Invariant { field: String, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl Error {
    pub fn invariant(field: &str, msg: impl Into<String>) -> Self {
        Error::Invariant {
            field: field.to_string(),
            msg: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
