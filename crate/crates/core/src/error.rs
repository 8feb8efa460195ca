use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid face index {index} (mesh has {vertex_count} vertices)")]
    InvalidFaceIndex { index: usize, vertex_count: usize },

    #[error("degenerate face {face}: repeated vertex index")]
    DegenerateFace { face: usize },

    #[error("non-manifold edge ({0}, {1}): more than two incident faces")]
    NonManifoldEdge(usize, usize),

    #[error("inconsistent orientation along edge ({0}, {1})")]
    InconsistentOrientation(usize, usize),

    #[error("empty mesh")]
    EmptyMesh,

    #[error("zero-area mesh or triangle")]
    ZeroArea,

    #[error("invalid landmark: {0}")]
    InvalidLandmark(String),

    #[error("landmarks too close: {0} and {1} are {2} rings apart (at least 4 required)")]
    LandmarksTooClose(usize, usize, usize),

    #[error("landmark {0} lies on a pre-existing boundary")]
    LandmarkOnBoundary(usize),

    #[error("circle radius {radius} must be shorter than the shortest incident edge {edge}")]
    RadiusTooLarge { radius: f64, edge: f64 },

    #[error("zero-length edge incident to vertex {0}")]
    ZeroLengthEdge(usize),

    #[error("boundary loop is not closed")]
    OpenLoop,

    #[error("all degrees of freedom are constrained")]
    AllConstrained,

    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(String),

    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),

    #[error("requested {requested} eigenpairs but only {available} are available")]
    TooManyEigenpairs { requested: usize, available: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("vertex {0} is unreachable")]
    Unreachable(usize),

    #[error("missing ground-truth entry for vertex {0}")]
    MissingGroundTruth(usize),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
