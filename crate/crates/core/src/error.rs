use thiserror::Error;

/// Errors produced by the layer-dynamics library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid functions live on different grids")]
    IncompatibleGrids,

    #[error("invalid model parameters: {0}")]
    InvalidModel(String),

    #[error("boundary value mismatch at {side} node: expected {expected}, found {found}")]
    BoundaryViolation {
        side: &'static str,
        expected: f64,
        found: f64,
    },

    #[error("layer position {xi} is within {margin} of the boundary")]
    LayerAtBoundary { xi: f64, margin: f64 },

    #[error("root finding failed: {0}")]
    RootFailure(String),

    #[error("eigensolver failed: {0}")]
    SpectralFailure(String),

    #[error("asymptotic formula outside its domain: {0}")]
    Domain(String),

    #[error("projection onto the profile family failed: {0}")]
    ProjectionFailure(String),

    #[error("no internal layer: the field does not change sign")]
    NoLayer,

    #[error("time step rejected: {0}")]
    StepRejected(String),

    #[error("integration aborted at t = {t}: {reason}")]
    RuntimeAbort { t: f64, reason: String },

    #[error("configuration error for key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
