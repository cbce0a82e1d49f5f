//! Error type shared across the crate.

use thiserror::Error;

/// Everything that can go wrong in a czwave computation.
#[derive(Debug, Error)]
pub enum CzError {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value at node {node} (x = {x:?}) while evaluating `{context}`")]
    NonFinite {
        node: usize,
        x: Vec<f64>,
        context: String,
    },

    #[error("scale t = {t} is below resolution (minimum 2h = {min})")]
    ScaleBelowResolution { t: f64, min: f64 },

    #[error("support escapes the grid domain: {0}")]
    SupportEscapes(String),

    #[error("singular multiplier at xi = 0 but input has non-negligible mean (|hat(0)| = {mass:.3e})")]
    SingularMultiplier { mass: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("parse error at column {col}: {msg}")]
    Parse { col: usize, msg: String },

    #[error("config error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, msg: String },

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("calibration failed after {doublings} doublings: level set still covers {ratio:.3} of the root cube")]
    Calibration { doublings: u32, ratio: f64 },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CzError>;
