use thiserror::Error;

use crate::md::ThermoRecord;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("particle overlap: particles {i} and {j} at distance {distance}")]
    Overlap { i: usize, j: usize, distance: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    /// Non-finite loss or prediction during training. Carries the last
    /// finite parameter vector so callers can write a diagnostic checkpoint.
    #[error("training diverged at epoch {epoch}: {detail}")]
    Divergence {
        epoch: usize,
        detail: String,
        last_params: Vec<f64>,
    },

    /// MD run aborted; `log` holds the thermo records written so far.
    #[error("simulation aborted at step {step}: {reason}")]
    SimulationAborted {
        step: u64,
        reason: String,
        log: Vec<ThermoRecord>,
    },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
