// SPDX-License-Identifier: MIT OR Apache-2.0

//! Exact direct solvers for univariate TV denoising.
//!
//! Both run the same bound-tracking state machine as the multivariate
//! streaming solver with `M = 1`, where the solution is local and the
//! machine is exact.

use crate::error::{Result, TvError};
use crate::signal::Signal;
use crate::stream::known_z::solve_weighted;

/// Minimiser of `1/2 ||x - y||^2 + lambda * sum_k |x_{k+1} - x_k|`.
pub fn tv1d_direct(y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if y.is_empty() {
        return Err(TvError::Empty);
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(TvError::InvalidParameter(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    if lambda == 0.0 {
        return Ok(y.to_vec());
    }
    let signal = Signal::from_univariate(y)?;
    let weight = [lambda];
    Ok(solve_weighted(&signal, |_| &weight)?.into_vec())
}

/// Minimiser of `1/2 ||x - y||^2 + sum_k w_k |x_{k+1} - x_k|` with `w` of
/// length `N - 1`.
pub fn tv1d_weighted(y: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    if y.is_empty() {
        return Err(TvError::Empty);
    }
    if w.len() + 1 != y.len() {
        return Err(TvError::Dimension(format!(
            "expected {} weights for {} samples, got {}",
            y.len() - 1,
            y.len(),
            w.len()
        )));
    }
    if let Some(k) = w.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(TvError::InvalidParameter(format!(
            "weight {k} is negative or not finite: {}",
            w[k]
        )));
    }
    let signal = Signal::from_univariate(y)?;
    Ok(solve_weighted(&signal, |k| std::slice::from_ref(&w[k]))?.into_vec())
}
