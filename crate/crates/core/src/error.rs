//! Error type shared across the toolkit.
//!
//! Variants are grouped by recovery class: configuration problems, bad input
//! data, numeric failures, and model-file decoding problems. The CLI maps
//! these onto its exit-code taxonomy.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameter, option, or flag combination.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed or inconsistent input data.
    #[error("data error: {0}")]
    Data(String),

    /// Numeric failure: divergence, zero probability under k = 0, etc.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// The file does not start with the `VTXT` magic bytes.
    #[error("not a model file (bad magic)")]
    NotAModelFile,

    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u16),

    /// The file ended before a declared field or section was complete.
    #[error("model file truncated: {0}")]
    Truncated(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
