// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic signals, noise and error metrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TvError};
use crate::signal::Signal;
use crate::stream::StreamResult;

/// Mean of the Gaussian whose absolute value gives a segment length.
pub const SEGMENT_LENGTH_MEAN: f64 = 12.5;
pub const SEGMENT_LENGTH_VARIANCE: f64 = 16.25;
pub const JUMP_MEAN: f64 = 2.0;
pub const JUMP_VARIANCE: f64 = 0.4;

pub const KERNEL_LEN: usize = 10;
pub const KERNEL_STD: f64 = 3.0;

/// Tolerance used by [`change_indicator`].
pub const CHANGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConstantSignal {
    /// 0-based index of the first sample of every segment but the first.
    pub breakpoints: Vec<usize>,
    pub levels: Vec<Vec<f64>>,
    pub x: Signal,
}

impl PiecewiseConstantSignal {
    /// `r_i = 1` when a segment ends at sample `i`.
    pub fn indicator(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.x.len()];
        for b in &self.breakpoints {
            r[b - 1] = 1.0;
        }
        r
    }
}

/// Random piecewise-constant signal with joint jumps, seeded.
pub fn generate_piecewise(m: usize, n: usize, seed: u64) -> Result<PiecewiseConstantSignal> {
    generate_piecewise_with(m, n, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn generate_piecewise_with<R: Rng + ?Sized>(
    m: usize,
    n: usize,
    rng: &mut R,
) -> Result<PiecewiseConstantSignal> {
    if m == 0 || n == 0 {
        return Err(TvError::InvalidParameter(
            "M and N must be at least 1".into(),
        ));
    }
    let lengths =
        Normal::new(SEGMENT_LENGTH_MEAN, SEGMENT_LENGTH_VARIANCE.sqrt()).expect("valid normal");
    let jumps = Normal::new(JUMP_MEAN, JUMP_VARIANCE.sqrt()).expect("valid normal");
    let mut breakpoints = Vec::new();
    let mut levels = vec![vec![0.0; m]];
    let mut x = Signal::zeros(m, n);
    let mut start = 0;
    loop {
        let len = (lengths.sample(rng).abs().ceil() as usize).max(1);
        let end = (start + len).min(n);
        let level = levels.last().expect("at least one level").clone();
        for k in start..end {
            x.sample_mut(k).copy_from_slice(&level);
        }
        if end == n {
            break;
        }
        let next = level
            .iter()
            .map(|v| {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                v + sign * jumps.sample(rng)
            })
            .collect();
        breakpoints.push(end);
        levels.push(next);
        start = end;
    }
    Ok(PiecewiseConstantSignal {
        breakpoints,
        levels,
        x,
    })
}

/// Population variance over every entry of `x`.
pub fn global_variance(x: &Signal) -> f64 {
    let data = x.as_slice();
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// `x` plus white Gaussian noise at the given SNR (dB). `f64::INFINITY`
/// returns `x` unchanged.
pub fn add_noise(x: &Signal, snr_db: f64, seed: u64) -> Result<Signal> {
    add_noise_with(x, snr_db, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn add_noise_with<R: Rng + ?Sized>(x: &Signal, snr_db: f64, rng: &mut R) -> Result<Signal> {
    if snr_db == f64::INFINITY {
        return Ok(x.clone());
    }
    if !snr_db.is_finite() {
        return Err(TvError::InvalidParameter(format!("invalid SNR {snr_db}")));
    }
    if x.is_empty() {
        return Err(TvError::Empty);
    }
    let var = global_variance(x);
    if !(var > 0.0) {
        return Err(TvError::InvalidParameter(
            "constant signal has no variance to set a finite SNR against".into(),
        ));
    }
    let sigma = (var / 10f64.powf(snr_db / 10.0)).sqrt();
    let noise = Normal::new(0.0, sigma).map_err(|e| TvError::InvalidParameter(e.to_string()))?;
    let data = x.as_slice().iter().map(|v| v + noise.sample(rng)).collect();
    Signal::new(x.components(), x.len(), data)
}

/// `||a - b||_F^2 / N`.
pub fn mse(a: &Signal, b: &Signal) -> Result<f64> {
    a.same_shape(b)?;
    if a.is_empty() {
        return Err(TvError::Empty);
    }
    let ss: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(p, q)| (p - q).powi(2))
        .sum();
    Ok(ss / a.len() as f64)
}

/// `r_i = 1` when any component changes between samples `i` and `i + 1`.
pub fn change_indicator(x: &Signal) -> Vec<f64> {
    let n = x.len();
    let mut r = vec![0.0; n];
    for k in 0..n.saturating_sub(1) {
        if x.sample(k)
            .iter()
            .zip(x.sample(k + 1))
            .any(|(a, b)| (a - b).abs() > CHANGE_TOL)
        {
            r[k] = 1.0;
        }
    }
    r
}

/// Change indicator of the segmentation committed by the streaming solver:
/// `r_i = 1` when a segment ends at `i < N - 1`.
pub fn stream_indicator(result: &StreamResult) -> Vec<f64> {
    let n = result.samples_consumed;
    let mut r = vec![0.0; n];
    for s in &result.segments {
        if s.end + 1 < n {
            r[s.end] = 1.0;
        }
    }
    r
}

/// Length-10 Gaussian kernel with standard deviation 3, centred between its
/// 5th and 6th taps and scaled so that its largest tap is 1.
pub fn gaussian_kernel() -> [f64; KERNEL_LEN] {
    let centre = (KERNEL_LEN as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..KERNEL_LEN)
        .map(|i| (-(i as f64 - centre).powi(2) / (2.0 * KERNEL_STD * KERNEL_STD)).exp())
        .collect();
    let peak = raw.iter().cloned().fold(0.0, f64::max);
    std::array::from_fn(|i| raw[i] / peak)
}

/// Same-length convolution with [`gaussian_kernel`], zero padded.
pub fn smooth(r: &[f64]) -> Vec<f64> {
    let kernel = gaussian_kernel();
    let half = KERNEL_LEN / 2;
    let n = r.len() as isize;
    (0..r.len())
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(j, w)| {
                    let idx = i as isize + j as isize - half as isize;
                    if idx >= 0 && idx < n {
                        w * r[idx as usize]
                    } else {
                        0.0
                    }
                })
                .sum()
        })
        .collect()
}

/// Jaccard index of two nonnegative vectors. Two all-zero inputs give 1.
pub fn jaccard(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(TvError::Dimension(format!(
            "lengths differ: {} and {}",
            a.len(),
            b.len()
        )));
    }
    if let Some(v) = a.iter().chain(b).find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(TvError::InvalidParameter(format!(
            "entries must be nonnegative, got {v}"
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        num += x.min(y);
        den += match (x > 0.0, y > 0.0) {
            (true, true) => 0.5 * (x + y),
            (true, false) => x,
            (false, true) => y,
            (false, false) => 0.0,
        };
    }
    if den == 0.0 {
        return Ok(1.0);
    }
    Ok(num / den)
}

/// [`jaccard`] after smoothing both indicators.
pub fn smoothed_jaccard(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(TvError::Dimension(format!(
            "lengths differ: {} and {}",
            a.len(),
            b.len()
        )));
    }
    jaccard(&smooth(a), &smooth(b))
}

/// Median of a nonempty slice (mean of the two middle values for even lengths).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    })
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}
