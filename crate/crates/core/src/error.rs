use thiserror::Error;

/// Everything that can go wrong between a surface description and a helicity value.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid surface: {0}")]
    InvalidSurface(String),
    #[error("degenerate surface frame at (u, v) = ({u}, {v})")]
    DegenerateFrame { u: f64, v: f64 },
    #[error("mode ({m}, {n}) is not present in the surface description")]
    AbsentMode { m: u32, n: i32 },
    #[error("invalid resolution: {0}")]
    InvalidResolution(String),
    #[error("{} inverted or degenerate cell(s), first at tet {}", .tets.len(), .tets[0])]
    InvertedCell { tets: Vec<usize> },
    #[error("non-manifold mesh: face {face:?} is shared by {count} tetrahedra")]
    NonManifold { face: [usize; 3], count: usize },
    #[error("cut surface not found: {0}")]
    CutNotFound(String),
    #[error("vertex {0} has no surface chart")]
    MissingChart(usize),
    #[error("expected a field of level {expected}, got level {got}")]
    LevelMismatch { expected: u8, got: u8 },
    #[error("coefficient vector has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("face {0} is not a boundary face")]
    NotBoundary(usize),
    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("singular system: {0}")]
    Singular(String),
    #[error(
        "iterative solver stopped after {iterations} iterations at relative residual {residual:e}"
    )]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
