use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The inverse transform left an imaginary part that is too large to drop.
    #[error("imaginary residue {residue:e} exceeds tolerance {limit:e}; spectrum is not conjugate-symmetric")]
    SymmetryViolation { residue: f64, limit: f64 },

    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("image has a zero dimension ({width}x{height})")]
    ZeroDimension { width: usize, height: usize },

    #[error("malformed image data: {0}")]
    Decode(String),

    #[error("malformed experiment spec at line {line}: {message}")]
    Spec { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
