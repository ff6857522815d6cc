use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("raster dimensions differ: occupancy {occupancy:?}, labels {labels:?}")]
    DimensionMismatch {
        occupancy: (u32, u32),
        labels: (u32, u32),
    },
    #[error("unknown label code {code} at pixel ({col}, {row})")]
    UnknownLabelCode { code: u8, col: u32, row: u32 },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("invalid floorplan: {0}")]
    InvalidPlan(String),
    #[error("grid index ({col}, {row}) outside {width}x{height} plan")]
    IndexOutOfBounds {
        col: usize,
        row: usize,
        width: usize,
        height: usize,
    },
    #[error("plan has no occupied cells")]
    EmptyPlan,
    #[error("plan has no free cells")]
    NoFreeCells,
    #[error("pose ({x:.3}, {y:.3}) lies outside the map")]
    PoseOutsideMap { x: f64, y: f64 },
    #[error("scan has no readings")]
    DegenerateScan,
    #[error("scan reading {index} has no range but the sensor model requires one")]
    MissingRange { index: usize },
    #[error("all particle weights are zero; the filter diverged")]
    Divergence,
    #[error("trajectory association produced no pairs")]
    NoPairs,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("world spec cannot be satisfied: {0}")]
    UnsatisfiableWorld(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}
