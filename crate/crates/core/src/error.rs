use std::path::PathBuf;

use thiserror::Error;

use crate::raster::BoundingBox;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid raster: {0}")]
    InvalidRaster(String),

    #[error("bounding box {bbox:?} does not fit in a {width}x{height} image")]
    BoxOutOfBounds {
        bbox: BoundingBox,
        width: usize,
        height: usize,
    },

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("mask has no positive pixels")]
    EmptyMask,

    #[error("degenerate ground truth: {positives} positives, {negatives} negatives")]
    DegenerateMask { positives: u64, negatives: u64 },

    #[error("image {width}x{height} is smaller than the {tiles_x}x{tiles_y} tile grid")]
    ImageTooSmall {
        width: usize,
        height: usize,
        tiles_x: usize,
        tiles_y: usize,
    },

    #[error("invalid color range: lower {lower:?} exceeds upper {upper:?}")]
    InvalidRange { lower: [u8; 3], upper: [u8; 3] },

    #[error("invalid structuring element size {0}: must be odd and >= 1")]
    InvalidKernel(usize),

    #[error("unknown cell category {0:?}")]
    UnknownCategory(String),

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("image {0:?} has no ground-truth pixels for the requested source")]
    EmptyGroundTruth(String),

    #[error("comparison needs two mask sources, found {0}")]
    InsufficientSources(usize),

    #[error("image {image_id}: {source}")]
    Image {
        image_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Attach an image id to an error, leaving already-tagged errors alone.
    pub fn for_image(self, image_id: &str) -> Self {
        match self {
            tagged @ Error::Image { .. } => tagged,
            other => Error::Image {
                image_id: image_id.to_string(),
                source: Box::new(other),
            },
        }
    }

    /// The error with any image tag peeled off.
    pub fn root(&self) -> &Error {
        match self {
            Error::Image { source, .. } => source.root(),
            other => other,
        }
    }
}
