use thiserror::Error;

/// Errors produced by parsers, model loaders and the benchmark harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid instance: {0}")]
    Instance(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite activation in layer {layer}: {what}")]
    NonFinite { layer: usize, what: String },

    #[error("{0}")]
    Invalid(String),

    #[error("missing best-known solution for instance '{0}'")]
    MissingBks(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
