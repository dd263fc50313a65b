use std::io;

use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A caller broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Input data is malformed (bad gaps, bad point file rows, ...).
    #[error("invalid data: {0}")]
    Data(String),

    /// A statistic is undefined for the given input (too few samples, zero variance).
    #[error("undefined statistic: {0}")]
    Undefined(String),

    /// An experiment configuration violates its invariants.
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
