use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    /// The requested operation cannot be represented on the current grid.
    #[error("resolution: {0}")]
    Resolution(String),

    /// A functional is not defined for the given input (zero gradient, zero field, ...).
    #[error("undefined: {0}")]
    Undefined(String),

    #[error("iteration diverged after {iterations} steps: {reason}")]
    Divergence { iterations: usize, reason: String },

    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("descent stalled at iteration {iterations}: step {step:.3e} below minimum")]
    Stall { iterations: usize, step: f64 },

    /// `|u|^α` left the floating-point range during a step.
    #[error("overflow at t = {time}: {reason}")]
    Overflow { time: f64, reason: String },

    #[error("bad snapshot file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
