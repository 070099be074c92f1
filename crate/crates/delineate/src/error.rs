//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("malformed graymap: {0}")]
    Graymap(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("unknown vertex id {id} referenced by edge {edge}")]
    UnknownVertexId { id: u64, edge: usize },

    #[error("coordinate out of bounds: {what} at ({x}, {y}) outside {width}x{height}")]
    CoordinateOutOfBounds {
        what: String,
        x: f64,
        y: f64,
        width: u32,
        height: u32,
    },

    #[error("invalid patch window: {0}")]
    InvalidWindow(String),

    #[error(
        "window centered at ({cx}, {cy}) with patch size {patch_size} does not fit inside {width}x{height}"
    )]
    WindowOutOfBounds {
        cx: f64,
        cy: f64,
        patch_size: u32,
        width: u32,
        height: u32,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("connectivity-av requires artery/vein labels, found {found}")]
    ClassLabelMismatch { found: String },

    #[error("no vertex has a {patch_size}-px window inside the image")]
    NoEligibleVertex { patch_size: u32 },

    #[error("predictor miss: no stored heatmap within 1 px of ({x}, {y})")]
    PredictorMiss { x: f64, y: f64 },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: String, right: String },

    #[error("connectivity undefined: ground truth has no skeleton pixels")]
    EmptyGroundTruth,

    #[error("could not satisfy separation after {attempts} placement attempts")]
    SeparationUnsatisfiable { attempts: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
