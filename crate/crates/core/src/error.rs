use std::io;

use thiserror::Error;

/// Errors raised anywhere in the emulator pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("Newton iteration for Gauss-Legendre node {index} of {n} did not converge")]
    NonConvergent { index: usize, n: usize },

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    Shape { expected: Vec<usize>, got: Vec<usize> },

    #[error("spectral truncation mismatch: expected {expected}, got {got}")]
    Truncation { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("autodiff: {0}")]
    Tape(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("{0} is out of range")]
    OutOfRange(String),

    #[error("format: {0}")]
    Format(String),

    #[error("unsupported container version {0}")]
    UnsupportedVersion(u32),

    #[error("payload length mismatch: expected {expected} bytes, found {found}")]
    PayloadLength { expected: u64, found: u64 },

    #[error("missing channel or variable `{0}`")]
    Missing(String),

    #[error("training aborted at epoch {epoch}, batch {batch}: {reason}")]
    TrainingAborted {
        epoch: usize,
        batch: usize,
        reason: String,
    },

    #[error("rollout aborted at step {step}: {reason}")]
    RolloutAborted { step: usize, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}
