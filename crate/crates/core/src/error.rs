use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the evaluation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {reason}")]
    UnreadableFile { path: PathBuf, reason: String },

    #[error("unsupported mesh format: {0}")]
    UnsupportedFormat(String),

    #[error("mesh has no faces after filtering degenerate triangles")]
    EmptyMesh,

    #[error("face {face} references vertex {index} but mesh has {n_vertices} vertices")]
    FaceIndexOutOfRange {
        face: usize,
        index: usize,
        n_vertices: usize,
    },

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("point cloud covariance is rank deficient ({0})")]
    DegenerateCloud(String),

    #[error("ICP produced a non-finite update")]
    NonFiniteUpdate,

    #[error("visibility mask removed every point of the {0} cloud")]
    AllPointsOccluded(&'static str),

    #[error("convex hull is degenerate (rank < 3)")]
    DegenerateHull,

    #[error("rigid-body state became non-finite at t = {time:.4} s")]
    NonFiniteState { time: f64 },

    #[error("no valid grasps found after {attempts} attempts")]
    NoGraspsFound { attempts: usize },

    #[error("manifest schema violation at {pointer}: {message}")]
    SchemaViolation { pointer: String, message: String },

    #[error("referenced file does not exist: {0}")]
    MissingFile(PathBuf),

    #[error("I/O failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::IoFailure {
            path: path.into(),
            source,
        }
    }
}
