use thiserror::Error;

use crate::sympnet::Kind;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{kind} network {}", if *.needs_clock { "requires a clock time" } else { "takes no clock time" })]
    ClockMismatch { kind: Kind, needs_clock: bool },

    #[error("invalid architecture: {0}")]
    InvalidArch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("resonant forcing: omega0 == omega ({0})")]
    Resonant(f64),

    #[error("unknown system id `{0}`")]
    UnknownSystem(String),

    #[error("unknown experiment id `{0}`")]
    UnknownExperiment(String),

    #[error("system `{0}` has no separable split")]
    NotSeparable(String),

    #[error("system `{0}` has no exact flow")]
    NoExactFlow(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error(
        "non-finite loss at epoch {epoch} (max |param| = {max_abs_param:e} at index {param_index})"
    )]
    NonFiniteLoss {
        epoch: usize,
        max_abs_param: f64,
        param_index: usize,
    },

    #[error("unsupported checkpoint format version {0}")]
    CheckpointVersion(u32),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
