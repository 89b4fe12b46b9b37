use thiserror::Error;

/// Errors raised by the geometry, verification and reporting layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input contract violated: {0}")]
    Contract(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("stereographic projection is singular at the pole (distance {distance:e})")]
    Singularity { distance: f64 },

    #[error("restriction to the sphere left [-1, 1]: V = {value}")]
    FamilyIntegrity { value: f64 },

    #[error("polynomial rejected: worst residual {worst:e} at {at:?} ({which})")]
    Rejected {
        worst: f64,
        at: Vec<f64>,
        which: &'static str,
    },

    #[error(
        "start point is critical for V (|grad V| = {gradient_norm:e}) but V = {value} != {level}"
    )]
    StartAtFocal {
        gradient_norm: f64,
        value: f64,
        level: f64,
    },

    #[error("level {level} not reached along the normal circle: {reason}")]
    LevelNotReached { level: f64, reason: String },

    #[error("sampling failed: {accepted} of {requested} points after {attempts} attempts")]
    SamplingFailure {
        requested: usize,
        accepted: usize,
        attempts: usize,
    },

    #[error("shape operator undefined on the focal set (|grad V| = {gradient_norm:e})")]
    FocalDegeneracy { gradient_norm: f64 },

    #[error("eigenvalue clustering failed: {0}")]
    Clustering(String),

    #[error("parallel transport crosses a focal point at t = {critical_t}")]
    FocalCrossing { critical_t: f64 },

    #[error("pole lies on the focal set (|V(p)| = {value})")]
    PoleIsFocal { value: f64 },

    #[error("geodesic to the pole is numerically focal at t = {t}")]
    NumericallyFocal { t: f64 },

    #[error("insufficient sampling: {found} neighbours, need {needed}")]
    InsufficientSampling { found: usize, needed: usize },

    #[error("unknown family '{0}'")]
    UnknownFamily(String),

    #[error("invalid parameters: {0}")]
    Params(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
