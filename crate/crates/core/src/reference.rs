// SPDX-License-Identifier: MIT OR Apache-2.0

//! Iterative solver for the grouped TV problem, used as the exact oracle,
//! and the windowed online baseline built on it.
//!
//! The solver runs ADMM on the split `z = Lx` (one tridiagonal solve per
//! component and iteration, group soft-thresholding for `z`) and stops on
//! the relative change of the objective. Because `z` is exactly sparse, its
//! support gives the jump set; the solution is then polished by Newton's
//! method on the segment levels for that jump set and accepted only if the
//! resulting dual passes the optimality check.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, TvError};
use crate::signal::Signal;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactOptions {
    /// Stop when `|f_t - f_{t-1}| / max(|f_t|, eps) <= rel_tol`.
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Refine the ADMM iterate on its jump set and verify optimality.
    pub polish: bool,
    /// Initial ADMM penalty; adapted by residual balancing.
    pub rho: f64,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_iter: 200_000,
            polish: true,
            rho: 1.0,
        }
    }
}

impl ExactOptions {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }
}

/// Internal ADMM variables, reusable as a warm start.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    /// Component-major primal iterate.
    x: Vec<Vec<f64>>,
    /// Component-major split variable, `z ~ Lx`.
    z: Vec<Vec<f64>>,
    /// Scaled dual of `z = Lx`.
    w: Vec<Vec<f64>>,
    rho: f64,
}

impl AdmmState {
    /// Drops the oldest sample and appends `y_new`, for sliding windows.
    pub fn shifted(&self, y_new: &[f64]) -> Self {
        let shift = |v: &Vec<f64>, fill: f64| {
            let mut out = v[1.min(v.len())..].to_vec();
            out.push(fill);
            out
        };
        Self {
            x: self
                .x
                .iter()
                .zip(y_new)
                .map(|(v, y)| shift(v, *y))
                .collect(),
            z: self.z.iter().map(|v| shift(v, 0.0)).collect(),
            w: self.w.iter().map(|v| shift(v, 0.0)).collect(),
            rho: self.rho,
        }
    }

    fn samples(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    pub x: Signal,
    /// Dual sequence, `M x (N-1)`, with `x = y + L* u`.
    pub u: Signal,
    pub iterations: usize,
    pub rel_change: f64,
    /// `true` when the returned point came out of a verified polish step.
    pub polished: bool,
    pub state: AdmmState,
}

/// Solves the grouped TV problem to high accuracy.
pub fn solve_exact(y: &Signal, lambda: f64, options: ExactOptions) -> Result<ExactSolution> {
    solve_exact_from(y, lambda, options, None)
}

/// Like [`solve_exact`], optionally starting from a previous ADMM state of
/// the same size.
pub fn solve_exact_from(
    y: &Signal,
    lambda: f64,
    options: ExactOptions,
    warm: Option<AdmmState>,
) -> Result<ExactSolution> {
    if !(options.rel_tol > 0.0) {
        return Err(TvError::InvalidParameter("rel_tol must be positive".into()));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(TvError::InvalidParameter(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    if y.is_empty() {
        return Err(TvError::Empty);
    }
    let m = y.components();
    let n = y.len();
    let ys = y.to_components();
    if lambda == 0.0 || n == 1 {
        return Ok(ExactSolution {
            x: y.clone(),
            u: Signal::zeros(m, n - 1),
            iterations: 1,
            rel_change: 0.0,
            polished: true,
            state: AdmmState {
                x: ys,
                z: vec![vec![0.0; n - 1]; m],
                w: vec![vec![0.0; n - 1]; m],
                rho: options.rho,
            },
        });
    }

    let mut st = match warm {
        Some(s) if s.x.len() == m && s.samples() == n => s,
        _ => AdmmState {
            x: ys.clone(),
            z: vec![vec![0.0; n - 1]; m],
            w: vec![vec![0.0; n - 1]; m],
            rho: options.rho,
        },
    };
    let mut factor = Tridiagonal::new(n, st.rho);
    let mut prev_obj = objective_cm(&st.x, &ys, lambda);
    let mut rel = f64::INFINITY;
    let mut converged = false;
    let mut last_polish = 0usize;
    let mut rhs = vec![0.0; n];
    let mut v = vec![0.0; m];
    let mut z_old = vec![vec![0.0; n - 1]; m];

    for it in 1..=options.max_iter {
        // x-update
        for c in 0..m {
            for k in 0..n {
                let prev = if k > 0 {
                    st.z[c][k - 1] - st.w[c][k - 1]
                } else {
                    0.0
                };
                let next = if k < n - 1 {
                    st.z[c][k] - st.w[c][k]
                } else {
                    0.0
                };
                rhs[k] = ys[c][k] + st.rho * (prev - next);
            }
            factor.solve(&rhs, &mut st.x[c]);
        }
        // z- and w-updates
        let thresh = lambda / st.rho;
        let mut r_sq = 0.0;
        for c in 0..m {
            z_old[c].copy_from_slice(&st.z[c]);
        }
        for k in 0..n - 1 {
            for c in 0..m {
                v[c] = st.x[c][k + 1] - st.x[c][k] + st.w[c][k];
            }
            let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            let scale = if nv > thresh { 1.0 - thresh / nv } else { 0.0 };
            for c in 0..m {
                let d = st.x[c][k + 1] - st.x[c][k];
                st.z[c][k] = scale * v[c];
                st.w[c][k] += d - st.z[c][k];
                r_sq += (d - st.z[c][k]).powi(2);
            }
        }

        let obj = objective_cm(&st.x, &ys, lambda);
        rel = (obj - prev_obj).abs() / obj.abs().max(f64::EPSILON);
        prev_obj = obj;
        if rel <= options.rel_tol {
            converged = true;
            if !options.polish {
                return Ok(finish(st, y, it, rel, false));
            }
            if last_polish == 0 || it - last_polish >= 25 {
                last_polish = it;
                if let Some((x, u)) = polish(&ys, &st, lambda) {
                    let mut sol = finish(st, y, it, rel, true);
                    sol.x = x;
                    sol.u = u;
                    return Ok(sol);
                }
            }
        }

        if it % 10 == 0 {
            let mut s_sq = 0.0;
            for c in 0..m {
                for k in 0..n {
                    let prev = if k > 0 {
                        st.z[c][k - 1] - z_old[c][k - 1]
                    } else {
                        0.0
                    };
                    let next = if k < n - 1 {
                        st.z[c][k] - z_old[c][k]
                    } else {
                        0.0
                    };
                    s_sq += (prev - next).powi(2);
                }
            }
            let r = r_sq.sqrt();
            let s = st.rho * s_sq.sqrt();
            let factor_change = if r > 10.0 * s {
                2.0
            } else if s > 10.0 * r {
                0.5
            } else {
                1.0
            };
            if factor_change != 1.0 && st.rho * factor_change > 1e-6 && st.rho * factor_change < 1e6
            {
                st.rho *= factor_change;
                st.w.iter_mut().flatten().for_each(|w| *w /= factor_change);
                factor = Tridiagonal::new(n, st.rho);
            }
        }
    }

    if converged {
        let iters = options.max_iter;
        return Ok(finish(st, y, iters, rel, false));
    }
    Err(TvError::NotConverged {
        iterations: options.max_iter,
        last_rel_change: rel,
    })
}

fn finish(
    st: AdmmState,
    y: &Signal,
    iterations: usize,
    rel_change: f64,
    polished: bool,
) -> ExactSolution {
    let m = y.components();
    let n = y.len();
    let x = Signal::from_components(&st.x).expect("finite iterate");
    let mut u = Signal::zeros(m, n - 1);
    for c in 0..m {
        for k in 0..n - 1 {
            u.set(c, k, -st.rho * st.w[c][k]);
        }
    }
    ExactSolution {
        x,
        u,
        iterations,
        rel_change,
        polished,
        state: st,
    }
}

fn objective_cm(x: &[Vec<f64>], y: &[Vec<f64>], lambda: f64) -> f64 {
    let m = x.len();
    let n = x[0].len();
    let mut fid = 0.0;
    for c in 0..m {
        for k in 0..n {
            fid += (x[c][k] - y[c][k]).powi(2);
        }
    }
    let mut tv = 0.0;
    for k in 0..n - 1 {
        let mut s = 0.0;
        for c in 0..m {
            s += (x[c][k + 1] - x[c][k]).powi(2);
        }
        tv += s.sqrt();
    }
    0.5 * fid + lambda * tv
}

/// Factorisation of `I + rho L^T L` (symmetric tridiagonal) for the Thomas algorithm.
struct Tridiagonal {
    off: f64,
    /// Modified super-diagonal coefficients.
    c_prime: Vec<f64>,
    /// Pivots.
    denom: Vec<f64>,
}

impl Tridiagonal {
    fn new(n: usize, rho: f64) -> Self {
        let diag = |k: usize| {
            if n == 1 {
                1.0
            } else if k == 0 || k == n - 1 {
                1.0 + rho
            } else {
                1.0 + 2.0 * rho
            }
        };
        let off = -rho;
        let mut c_prime = vec![0.0; n];
        let mut denom = vec![0.0; n];
        denom[0] = diag(0);
        c_prime[0] = off / denom[0];
        for k in 1..n {
            denom[k] = diag(k) - off * c_prime[k - 1];
            c_prime[k] = off / denom[k];
        }
        Self {
            off,
            c_prime,
            denom,
        }
    }

    fn solve(&self, rhs: &[f64], out: &mut [f64]) {
        let n = rhs.len();
        out[0] = rhs[0] / self.denom[0];
        for k in 1..n {
            out[k] = (rhs[k] - self.off * out[k - 1]) / self.denom[k];
        }
        for k in (0..n - 1).rev() {
            out[k] -= self.c_prime[k] * out[k + 1];
        }
    }
}

/// Newton refinement of the segment levels on the jump set of `z`.
/// Returns the primal/dual pair when it satisfies the optimality conditions.
fn polish(y: &[Vec<f64>], st: &AdmmState, lambda: f64) -> Option<(Signal, Signal)> {
    let m = y.len();
    let n = y[0].len();
    let mut bounds = vec![0usize];
    for k in 0..n - 1 {
        if (0..m).any(|c| st.z[c][k] != 0.0) {
            bounds.push(k + 1);
        }
    }
    bounds.push(n);
    let segs = bounds.len() - 1;
    let sizes: Vec<f64> = (0..segs)
        .map(|s| (bounds[s + 1] - bounds[s]) as f64)
        .collect();
    let means: Vec<Vec<f64>> = (0..segs)
        .map(|s| {
            (0..m)
                .map(|c| y[c][bounds[s]..bounds[s + 1]].iter().sum::<f64>() / sizes[s])
                .collect()
        })
        .collect();
    let mut levels: Vec<Vec<f64>> = (0..segs)
        .map(|s| {
            (0..m)
                .map(|c| st.x[c][bounds[s]..bounds[s + 1]].iter().sum::<f64>() / sizes[s])
                .collect()
        })
        .collect();

    let scale = y
        .iter()
        .flatten()
        .fold(0.0f64, |a, v| a.max(v.abs()))
        .max(lambda)
        .max(1e-300);
    let reduced = |lv: &[Vec<f64>]| -> f64 {
        let mut f = 0.0;
        for s in 0..segs {
            for c in 0..m {
                f += 0.5 * sizes[s] * (lv[s][c] - means[s][c]).powi(2);
            }
            if s + 1 < segs {
                let d: f64 = (0..m)
                    .map(|c| (lv[s + 1][c] - lv[s][c]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                f += lambda * d;
            }
        }
        f
    };

    let mut converged = false;
    for _ in 0..60 {
        let (grad, diag_blocks, off_blocks) = newton_system(&levels, &means, &sizes, lambda)?;
        let gmax = grad.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        if gmax <= 1e-13 * scale * (n as f64).sqrt() {
            converged = true;
            break;
        }
        let step = block_tridiagonal_solve(&diag_blocks, &off_blocks, &grad)?;
        let f0 = reduced(&levels);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<Vec<f64>> = levels
                .iter()
                .zip(&step)
                .map(|(l, d)| l.iter().zip(d).map(|(a, b)| a - t * b).collect())
                .collect();
            if reduced(&trial) <= f0 + 1e-15 * f0.abs().max(1.0) {
                levels = trial;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // the step no longer decreases f: we are at machine precision
            converged = gmax <= 1e-9 * scale;
            break;
        }
    }
    if !converged {
        return None;
    }

    // every retained jump must be a real jump
    for s in 0..segs.saturating_sub(1) {
        let d: f64 = (0..m)
            .map(|c| (levels[s + 1][c] - levels[s][c]).powi(2))
            .sum::<f64>()
            .sqrt();
        if d <= 1e-12 * scale {
            return None;
        }
    }

    let mut x = Signal::zeros(m, n);
    for s in 0..segs {
        for k in bounds[s]..bounds[s + 1] {
            x.sample_mut(k).copy_from_slice(&levels[s]);
        }
    }
    let mut u = Signal::zeros(m, n - 1);
    let mut acc = vec![0.0; m];
    let feas_tol = lambda * 1e-10;
    for k in 0..n - 1 {
        for c in 0..m {
            acc[c] += y[c][k] - x.get(c, k);
        }
        if acc.iter().map(|a| a * a).sum::<f64>().sqrt() > lambda + feas_tol {
            return None;
        }
        u.sample_mut(k).copy_from_slice(&acc);
    }
    Some((x, u))
}

type Blocks = Vec<DMatrix<f64>>;

fn newton_system(
    levels: &[Vec<f64>],
    means: &[Vec<f64>],
    sizes: &[f64],
    lambda: f64,
) -> Option<(Vec<Vec<f64>>, Blocks, Blocks)> {
    let segs = levels.len();
    let m = levels[0].len();
    let mut grad: Vec<Vec<f64>> = (0..segs)
        .map(|s| {
            (0..m)
                .map(|c| sizes[s] * (levels[s][c] - means[s][c]))
                .collect()
        })
        .collect();
    let mut diag: Blocks = sizes.iter().map(|n| DMatrix::identity(m, m) * *n).collect();
    let mut off: Blocks = Vec::with_capacity(segs.saturating_sub(1));
    for s in 0..segs.saturating_sub(1) {
        let d = DVector::from_iterator(m, (0..m).map(|c| levels[s + 1][c] - levels[s][c]));
        let nd = d.norm();
        if !(nd > 0.0) {
            return None;
        }
        let g = &d / nd;
        for c in 0..m {
            grad[s][c] -= lambda * g[c];
            grad[s + 1][c] += lambda * g[c];
        }
        let p = (DMatrix::identity(m, m) - &g * g.transpose()) * (lambda / nd);
        diag[s] += &p;
        diag[s + 1] += &p;
        off.push(-p);
    }
    Some((grad, diag, off))
}

/// Solves a symmetric block-tridiagonal system with block Thomas elimination.
fn block_tridiagonal_solve(
    diag: &[DMatrix<f64>],
    off: &[DMatrix<f64>],
    rhs: &[Vec<f64>],
) -> Option<Vec<Vec<f64>>> {
    let segs = diag.len();
    let m = rhs[0].len();
    let mut c_prime: Vec<DMatrix<f64>> = Vec::with_capacity(segs);
    let mut d_prime: Vec<DVector<f64>> = Vec::with_capacity(segs);
    for s in 0..segs {
        let r = DVector::from_column_slice(&rhs[s]);
        let (pivot, r) = if s == 0 {
            (diag[0].clone(), r)
        } else {
            let lower = off[s - 1].transpose();
            (
                &diag[s] - &lower * &c_prime[s - 1],
                r - &lower * &d_prime[s - 1],
            )
        };
        let lu = pivot.lu();
        let up = if s + 1 < segs {
            lu.solve(&off[s])?
        } else {
            DMatrix::zeros(m, m)
        };
        c_prime.push(up);
        d_prime.push(lu.solve(&r)?);
    }
    let mut out = vec![DVector::zeros(m); segs];
    out[segs - 1] = d_prime[segs - 1].clone();
    for s in (0..segs - 1).rev() {
        out[s] = &d_prime[s] - &c_prime[s] * &out[s + 1];
    }
    Some(
        out.into_iter()
            .map(|v| v.iter().copied().collect())
            .collect(),
    )
}

/// Estimate at sample `k` from the exact solution on the last `window`
/// samples ending at `k` (0-based, inclusive).
pub fn solve_windowed(
    y: &Signal,
    lambda: f64,
    window: usize,
    k: usize,
    options: ExactOptions,
) -> Result<Vec<f64>> {
    if window < 1 {
        return Err(TvError::InvalidParameter(
            "window must be at least 1".into(),
        ));
    }
    if k >= y.len() {
        return Err(TvError::Dimension(format!(
            "index {k} out of range for {} samples",
            y.len()
        )));
    }
    let start = (k + 1).saturating_sub(window);
    let sol = solve_exact(&y.slice(start, k + 1), lambda, options)?;
    Ok(sol.x.sample(sol.x.len() - 1).to_vec())
}

/// Output of [`WindowedSolver::run`].
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedRun {
    /// Estimate at each `k` computed from the window ending at `k`.
    pub estimates: Signal,
    /// `flags[i] = 1` when the window solution at time `i + 1` jumps between
    /// samples `i` and `i + 1`.
    pub newest_jumps: Vec<u8>,
    /// Wall-clock seconds spent per incoming sample.
    pub seconds: Vec<f64>,
}

/// Naive online baseline: re-solve over the last `window` samples at every step.
#[derive(Debug, Clone, Copy)]
pub struct WindowedSolver {
    pub lambda: f64,
    pub window: usize,
    pub options: ExactOptions,
    pub warm_start: bool,
    /// Threshold on `||x_k - x_{k-1}||` for declaring a jump.
    pub jump_tol: f64,
}

impl WindowedSolver {
    pub fn new(lambda: f64, window: usize, options: ExactOptions) -> Self {
        Self {
            lambda,
            window,
            options,
            warm_start: false,
            jump_tol: crate::tv::DEFAULT_JUMP_TOL,
        }
    }

    pub fn run(&self, y: &Signal) -> Result<WindowedRun> {
        if self.window < 1 {
            return Err(TvError::InvalidParameter(
                "window must be at least 1".into(),
            ));
        }
        let n = y.len();
        let m = y.components();
        let mut estimates = Signal::zeros(m, n);
        let mut newest_jumps = vec![0u8; n];
        let mut seconds = Vec::with_capacity(n);
        let mut warm: Option<AdmmState> = None;
        for k in 0..n {
            let t0 = std::time::Instant::now();
            let start = (k + 1).saturating_sub(self.window);
            let slice = y.slice(start, k + 1);
            let init = match (&warm, self.warm_start) {
                (Some(prev), true) if prev.samples() == slice.len() => {
                    Some(prev.shifted(y.sample(k)))
                }
                (Some(prev), true) if prev.samples() + 1 == slice.len() => {
                    Some(grown(prev, y.sample(k)))
                }
                _ => None,
            };
            let sol = solve_exact_from(&slice, self.lambda, self.options, init)?;
            seconds.push(t0.elapsed().as_secs_f64());
            let last = sol.x.len() - 1;
            estimates.sample_mut(k).copy_from_slice(sol.x.sample(last));
            if last >= 1 {
                let d: f64 = sol
                    .x
                    .sample(last)
                    .iter()
                    .zip(sol.x.sample(last - 1))
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if d > self.jump_tol {
                    newest_jumps[k - 1] = 1;
                }
            }
            warm = Some(sol.state);
        }
        Ok(WindowedRun {
            estimates,
            newest_jumps,
            seconds,
        })
    }
}

fn grown(prev: &AdmmState, y_new: &[f64]) -> AdmmState {
    let mut next = prev.clone();
    for (c, v) in next.x.iter_mut().enumerate() {
        v.push(y_new[c]);
    }
    next.z.iter_mut().for_each(|v| v.push(0.0));
    next.w.iter_mut().for_each(|v| v.push(0.0));
    next
}
