//! Error type shared across the benchmark engine.

use thiserror::Error;

/// Errors produced by landscape ingestion, surrogate training, campaign
/// simulation, and the statistics layer.
#[derive(Error, Debug)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("size error: {0}")]
    Size(String),

    #[error("cannot encode character '{ch}' at position {pos}")]
    Encoding { ch: char, pos: usize },

    #[error("coverage error: {0}")]
    Coverage(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("training diverged at epoch {epoch}: {msg}")]
    TrainingDiverged { epoch: usize, msg: String },

    #[error("Cholesky factorization failed after jitter escalation up to {max_jitter:e}")]
    Cholesky { max_jitter: f64 },

    #[error("optimizer error: {0}")]
    Optimizer(String),

    #[error("run pairing error: {0}")]
    Pairing(String),

    #[error("rank correlation undefined: all values tied")]
    AllTied,

    #[error("hyperparameter search failed: {0}")]
    SearchFailed(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("run store error: {0}")]
    Store(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
