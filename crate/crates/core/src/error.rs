use thiserror::Error;

/// Errors raised by the boundary element library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AbemError {
    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),

    #[error("curve is not normalized (diameter {diameter} must be below 1)")]
    NotNormalized { diameter: f64 },

    #[error("point ({x}, {y}) is not a mesh node")]
    NotANode { x: f64, y: f64 },

    #[error("point ({x}, {y}) coincides with a segment endpoint")]
    PointAtEndpoint { x: f64, y: f64 },

    #[error("point ({x}, {y}) does not lie on the boundary curve")]
    PointOffCurve { x: f64, y: f64 },

    #[error("meshes are not nested: {0}")]
    NotNested(String),

    #[error("invalid element id {0}")]
    InvalidElement(usize),

    #[error("incompatible discrete space: {0}")]
    IncompatibleSpace(String),

    #[error("estimator {estimator} is not defined for the {equation} equation")]
    EstimatorMismatch {
        estimator: &'static str,
        equation: &'static str,
    },

    #[error("right-hand side regularity {found} is insufficient, {required} is required")]
    InsufficientRegularity {
        required: &'static str,
        found: &'static str,
    },

    #[error(
        "Cholesky factorization of a {dimension}x{dimension} matrix failed; matrix is not SPD"
    )]
    NotPositiveDefinite { dimension: usize },

    #[error("linear solve residual {relative:e} (relative) exceeds tolerance")]
    InaccurateSolve { relative: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("solution already at reference accuracy (zero error)")]
    ZeroError,

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("trace is missing {0}")]
    IncompleteTrace(&'static str),

    #[error("trace i/o: {0}")]
    TraceIo(String),
}

pub type Result<T, E = AbemError> = std::result::Result<T, E>;
