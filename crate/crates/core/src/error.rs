// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

/// Errors raised by the solvers, generators and metrics in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TvError {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("shape mismatch: expected {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    ShapeMismatch {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },

    #[error("non-finite value at component {component}, sample {sample}")]
    NonFinite { component: usize, sample: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid candidate: {0}")]
    InvalidCandidate(String),

    #[error("empty input")]
    Empty,

    #[error("state error: {0}")]
    State(String),

    #[error("solver did not converge after {iterations} iterations (last relative change {last_rel_change:e})")]
    NotConverged {
        iterations: usize,
        last_rel_change: f64,
    },
}

pub type Result<T> = std::result::Result<T, TvError>;
