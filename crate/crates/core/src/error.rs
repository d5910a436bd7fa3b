use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the correlation engine and its harness.
#[derive(Debug, Error)]
pub enum DicError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unreadable image: {0}")]
    Unreadable(String),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("zero-dimension image")]
    ZeroDimension,
    #[error("invalid image data: {0}")]
    InvalidImage(String),
    #[error("insufficient images: found {found}, need at least 2")]
    InsufficientImages { found: usize },
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("image too small to host any subset")]
    ImageTooSmall,
    #[error("textureless pattern")]
    TexturelessPattern,
    #[error("warp out of bounds")]
    WarpOutOfBounds,
    #[error("window out of range")]
    WindowOutOfRange,
    #[error("degenerate target subset")]
    DegenerateTarget,
    #[error("degenerate reference subset")]
    DegenerateReference,
    #[error("no valid search position")]
    NoValidPosition,
    #[error("all search positions degenerate")]
    AllPositionsDegenerate,
    #[error("degenerate subset")]
    DegenerateSubset,
    #[error("degenerate texture")]
    DegenerateTexture,
    #[error("drifted out of bounds")]
    DriftedOutOfBounds,
    #[error("non-invertible warp")]
    NonInvertibleWarp,
    #[error("coordinate ({0}, {1}) outside interpolation domain")]
    OutOfDomain(f64, f64),
    #[error("empty subset grid")]
    EmptyGrid,
    #[error("empty benchmark matrix")]
    EmptyMatrix,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl DicError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DicError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, DicError>;
