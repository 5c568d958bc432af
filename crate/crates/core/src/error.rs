use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("unsupported channel count {found} (expected {expected})")]
    ChannelCount { expected: &'static str, found: usize },

    #[error("sequence must contain an odd number of frames >= 3, got {0}")]
    FrameCount(usize),

    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("frame too small: {0}")]
    TooSmall(String),

    #[error("out of bounds: {0}")]
    OutOfBounds(String),

    #[error("displacement bound violated: {0}")]
    DisplacementBound(String),

    #[error("non-finite sample in {0}")]
    NonFinite(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn dims(expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// Errors that indicate a broken internal invariant rather than bad user input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::DimensionMismatch { .. } | Error::NonFinite(_))
    }
}
