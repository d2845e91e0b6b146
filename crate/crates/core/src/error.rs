// SPDX-License-Identifier: MIT OR Apache-2.0

//! Error type shared by every module.

use thiserror::Error;

/// Errors raised by the simulation, regression and orchestration layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller supplied parameters outside the documented domain.
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    /// An evaluator returned a non-finite value.
    #[error("non-finite value from {what} (player {player}, point {point})")]
    NonFinite { what: String, player: usize, point: String },

    /// A simulated state left the finite range.
    #[error("non-finite state at path {path}, step {step}, player {player}")]
    NonFiniteState { path: usize, step: usize, player: usize },

    /// Two objects that must share a grid, seed or shape do not.
    #[error("mismatch: {0}")]
    Mismatch(String),

    /// Regression stayed ill-conditioned after ridge escalation.
    #[error("singular regression at step {step} (condition estimate {condition:e})")]
    SingularRegression { step: usize, condition: f64 },

    /// Configuration could not be parsed or violates an invariant.
    #[error("configuration error: {0}")]
    Config(String),

    /// I/O failure while writing reports.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// CSV serialization failure.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// JSON serialization failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
