use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation's precondition.
    #[error("usage error: {0}")]
    Usage(String),

    /// A model document is malformed or violates a model invariant.
    #[error("model error at {location}: {message}")]
    Model { location: String, message: String },

    /// A brute-force enumeration would exceed its instance-size guard.
    #[error("instance too large for {what}: {size} exceeds limit {limit}")]
    Guard {
        what: &'static str,
        size: u128,
        limit: u128,
    },

    /// A benchmark sweep stopped at one grid point.
    #[error("sweep failed at {point}: {source}")]
    Sweep {
        point: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn model(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Model {
            location: location.into(),
            message: message.into(),
        }
    }
}
