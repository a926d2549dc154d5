// SPDX-License-Identifier: MIT OR Apache-2.0

//! Single-state driver for a known auxiliary sequence `z`.
//!
//! With `z` fixed the grouped problem splits into `M` weighted univariate
//! problems. Each component runs its own bound machine, and each new segment
//! carries the dual implied by the previous change point. Cutting all
//! components jointly would force a jump direction on components that have
//! not yet violated their bounds, which breaks exactness.

use super::bounds::{CandidateState, Step};
use crate::error::{Result, TvError};
use crate::signal::{norm, Signal};

/// Relative tolerance on `||z_k|| = lambda`.
const Z_NORM_TOL: f64 = 1e-9;

/// Solves the problem with a known nonnegative `z` (`M x (N-1)`, each column
/// of norm `lambda`).
pub fn solve_known_z(y: &Signal, z: &Signal, lambda: f64) -> Result<Signal> {
    if !(lambda > 0.0) {
        return Err(TvError::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    check_shape(y, z)?;
    for k in 0..z.len() {
        let zk = z.sample(k);
        if zk.iter().any(|v| *v < 0.0) {
            return Err(TvError::InvalidCandidate(format!(
                "z has a negative entry at {k}"
            )));
        }
        let n = norm(zk);
        if (n - lambda).abs() > Z_NORM_TOL * lambda.max(1.0) {
            return Err(TvError::InvalidCandidate(format!(
                "||z_{k}|| = {n}, expected {lambda}"
            )));
        }
    }
    let mut out = Signal::zeros(y.components(), y.len());
    for i in 0..y.components() {
        let yi = Signal::from_univariate(&y.component(i))?;
        let xi = solve_weighted(&yi, |k| std::slice::from_ref(&z.sample(k)[i]))?;
        for (k, v) in xi.as_slice().iter().enumerate() {
            out.set(i, k, *v);
        }
    }
    Ok(out)
}

fn check_shape(y: &Signal, z: &Signal) -> Result<()> {
    if y.is_empty() {
        return Err(TvError::Empty);
    }
    if z.components() != y.components() || z.len() + 1 != y.len() {
        return Err(TvError::ShapeMismatch {
            expected_rows: y.components(),
            expected_cols: y.len() - 1,
            rows: z.components(),
            cols: z.len(),
        });
    }
    Ok(())
}

/// Weighted driver: `weight(k)` bounds `|u_{m,k}|` for `k < N - 1`.
/// The last sample reuses `weight(N - 2)`; the zero closing dual is
/// enforced afterwards.
pub(crate) fn solve_weighted<'a, F>(y: &Signal, weight: F) -> Result<Signal>
where
    F: Fn(usize) -> &'a [f64],
{
    let n = y.len();
    let m = y.components();
    if n == 0 {
        return Err(TvError::Empty);
    }
    if n == 1 {
        return Ok(y.clone());
    }
    let w = |k: usize| weight(k.min(n - 2));
    let mut out = Signal::zeros(m, n);
    let mut k0 = 0;
    let mut carried = vec![0.0; m];
    while k0 < n {
        let mut st = CandidateState::with_weights(k0, y.sample(k0), w(k0), Some(&carried))?;
        loop {
            if st.k() == n - 1 {
                st.close_at_end();
                break;
            }
            let next = st.k() + 1;
            if st.advance_with(y.sample(next), w(next))? == Step::RuleOneViolated {
                break;
            }
        }
        let fin = st.finalize()?;
        for k in k0..=fin.k_rupt {
            out.sample_mut(k).copy_from_slice(&fin.level);
        }
        if fin.reaches_end {
            break;
        }
        let zr = w(fin.k_rupt);
        for i in 0..m {
            carried[i] = fin.directions[i].dual_sign() * zr[i];
        }
        k0 = fin.k_rupt + 1;
    }
    Ok(out)
}
