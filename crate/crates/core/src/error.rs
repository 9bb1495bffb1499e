use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite field")]
    NonFiniteField,

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("unsupported torus dimension {0} (expected 1 or 2)")]
    UnsupportedDimension(usize),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("CFL violation: number {cfl:.4} exceeds {cfl_max}; admissible dt = {admissible_dt:.6e}")]
    CflViolation {
        cfl: f64,
        cfl_max: f64,
        admissible_dt: f64,
    },

    #[error("time step must be positive and finite, got {0}")]
    InvalidTimeStep(f64),

    #[error("boundary vorticity mismatch: {0}")]
    BoundaryMismatch(String),

    #[error("monotonicity failure at x-node {column}: level sets are not invertible")]
    MonotonicityFailure { column: usize },

    #[error("rayleigh collapse: min d/dy omega = {min_slope:.6e}")]
    RayleighCollapse { min_slope: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("expression error at position {pos}: {msg}")]
    Expression { pos: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
