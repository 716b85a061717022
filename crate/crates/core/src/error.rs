use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("unsupported bit depth: {0}")]
    UnsupportedBitDepth(String),
    #[error("malformed png: {0}")]
    MalformedPng(String),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("invalid raster: {0}")]
    InvalidRaster(String),
    #[error("invalid sample at index {index}: {value}")]
    InvalidSample { index: usize, value: f32 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("map has no valid pixels")]
    NoValidPixels,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: String, right: String },
    #[error("image too small: {width}x{height}, need at least {min_width}x{min_height}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min_width: usize,
        min_height: usize,
    },

    #[error("{0} hole pixels remain unfilled")]
    UnfilledHoles(usize),
    #[error("background pool is empty")]
    EmptyPool,
    #[error("every pixel is masked as a hole")]
    AllHoles,
    #[error("external inpainter failed: {0}")]
    ExternalFailure(String),

    #[error("prediction and ground truth share no valid pixel")]
    NoOverlap,
    #[error("expected exactly {expected} values, got {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("dataset {dataset} is missing metric {metric}")]
    MissingMetric { dataset: String, metric: String },
    #[error("k = {k} out of range 1..={len}")]
    KOutOfRange { k: usize, len: usize },

    #[error("invalid config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn dims(left: (usize, usize), right: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            left: format!("{}x{}", left.0, left.1),
            right: format!("{}x{}", right.0, right.1),
        }
    }

    /// Attach a file path to this error.
    pub fn at(self, path: impl Into<PathBuf>) -> Self {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, with any file-path context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::File { source, .. } => source.root(),
            other => other,
        }
    }
}
