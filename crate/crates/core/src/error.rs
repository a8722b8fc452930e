use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", path.display())]
    FileNotFound { path: PathBuf },

    #[error("unsupported image format in {}: {cause}", path.display())]
    UnsupportedFormat { path: PathBuf, cause: String },

    #[error("corrupt image data in {}: {cause}", path.display())]
    CorruptData { path: PathBuf, cause: String },

    #[error("i/o failure on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("expected {expected} channel(s), got {actual}")]
    WrongChannelCount { expected: usize, actual: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("region {x},{y} {width}x{height} is outside a {plane_width}x{plane_height} plane")]
    RegionOutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
        plane_width: usize,
        plane_height: usize,
    },

    #[error("grid {cols}x{rows} is too fine for a {width}x{height} image (tiles must be at least 2x2)")]
    GridTooFine {
        cols: usize,
        rows: usize,
        width: usize,
        height: usize,
    },

    #[error("image {width}x{height} is too small (need at least {min}x{min})")]
    ImageTooSmall { width: usize, height: usize, min: usize },

    #[error("score model mismatch: {0}")]
    ModelMismatch(String),

    #[error("dataset at {} contains no images", root.display())]
    EmptyDataset { root: PathBuf },

    #[error("cannot read directory {}: {cause}", path.display())]
    UnreadableDirectory { path: PathBuf, cause: String },

    #[error("confusion matrix is empty")]
    EmptyMatrix,

    #[error("architecture sets differ: {0}")]
    UnmatchedArchitecture(String),

    #[error("malformed {what} in {}: {cause}", path.display())]
    Malformed {
        what: &'static str,
        path: PathBuf,
        cause: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the filesystem rather than by the data.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::FileNotFound { .. }
                | Error::Io { .. }
                | Error::UnreadableDirectory { .. }
        )
    }
}
