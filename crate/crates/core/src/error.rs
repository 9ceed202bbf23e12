use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("{kind} index {index} out of range (len {len})")]
    IndexOutOfRange {
        kind: &'static str,
        index: usize,
        len: usize,
    },

    #[error("singular {k}x{k} system while solving {context}")]
    SingularSystem { context: String, k: usize },

    #[error("non-finite item factors at epoch {epoch}, server round {round}")]
    Diverged { epoch: usize, round: usize },

    #[error("invalid hyper-parameter: {0}")]
    InvalidHyperParams(String),

    #[error("invalid interactions: {0}")]
    InvalidInteractions(String),

    #[error("infeasible generator constraints: {0}")]
    Infeasible(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("reference value is zero")]
    ZeroReference,

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("malformed payload: {0}")]
    MalformedPayload(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
