use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("png decode error: {0}")]
    PngDecode(#[from] png::DecodingError),

    #[error("png encode error: {0}")]
    PngEncode(#[from] png::EncodingError),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("malformed file: {0}")]
    Malformed(String),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("wrong colour space: expected {expected}, got {actual}")]
    WrongSpace {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("shape mismatch: {left} vs {right}")]
    ShapeMismatch { left: String, right: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("operator failed on patch {index}: {source}")]
    Operator {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("subprocess error: {0}")]
    Subprocess(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
