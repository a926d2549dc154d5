// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dense `M x N` real matrices with sample-major storage.
//!
//! Rows are components `m`, columns are time samples `k`. Samples are stored
//! contiguously so that streaming code can hand out `&[f64]` views of one
//! time step without copying.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TvError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    components: usize,
    samples: usize,
    data: Vec<f64>,
}

impl Signal {
    /// Builds a signal from sample-major data (`data[k * M + m]`).
    pub fn new(components: usize, samples: usize, data: Vec<f64>) -> Result<Self> {
        if components == 0 {
            return Err(TvError::Dimension(
                "a signal needs at least one component".into(),
            ));
        }
        if data.len() != components * samples {
            return Err(TvError::Dimension(format!(
                "expected {} values for {components}x{samples}, got {}",
                components * samples,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(TvError::NonFinite {
                component: pos % components,
                sample: pos / components,
            });
        }
        Ok(Self {
            components,
            samples,
            data,
        })
    }

    pub fn zeros(components: usize, samples: usize) -> Self {
        assert!(components > 0, "a signal needs at least one component");
        Self {
            components,
            samples,
            data: vec![0.0; components * samples],
        }
    }

    /// One inner vector per time sample, each of length `M`.
    pub fn from_samples(samples: &[Vec<f64>]) -> Result<Self> {
        let first = samples.first().ok_or(TvError::Empty)?;
        let m = first.len();
        let mut data = Vec::with_capacity(m * samples.len());
        for (k, s) in samples.iter().enumerate() {
            if s.len() != m {
                return Err(TvError::Dimension(format!(
                    "sample {k} has {} components, expected {m}",
                    s.len()
                )));
            }
            data.extend_from_slice(s);
        }
        Self::new(m, samples.len(), data)
    }

    /// One inner vector per component, each of length `N`.
    pub fn from_components(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(TvError::Empty)?;
        let n = first.len();
        let m = rows.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != n) {
            return Err(TvError::Dimension(format!(
                "component {bad} has {} samples, expected {n}",
                rows[bad].len()
            )));
        }
        let mut data = vec![0.0; m * n];
        for (c, row) in rows.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                data[k * m + c] = *v;
            }
        }
        Self::new(m, n, data)
    }

    pub fn from_univariate(values: &[f64]) -> Result<Self> {
        Self::new(1, values.len(), values.to_vec())
    }

    #[inline]
    pub fn components(&self) -> usize {
        self.components
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.samples
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.samples == 0
    }

    #[inline]
    pub fn get(&self, m: usize, k: usize) -> f64 {
        self.data[k * self.components + m]
    }

    #[inline]
    pub fn set(&mut self, m: usize, k: usize, value: f64) {
        self.data[k * self.components + m] = value;
    }

    #[inline]
    pub fn sample(&self, k: usize) -> &[f64] {
        &self.data[k * self.components..(k + 1) * self.components]
    }

    #[inline]
    pub fn sample_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.components..(k + 1) * self.components]
    }

    pub fn samples(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.components)
    }

    pub fn component(&self, m: usize) -> Vec<f64> {
        (0..self.samples).map(|k| self.get(m, k)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn to_samples(&self) -> Vec<Vec<f64>> {
        self.samples().map(|s| s.to_vec()).collect()
    }

    pub fn to_components(&self) -> Vec<Vec<f64>> {
        (0..self.components).map(|m| self.component(m)).collect()
    }

    /// Columns `start..end` as a new signal.
    pub fn slice(&self, start: usize, end: usize) -> Signal {
        assert!(start <= end && end <= self.samples, "slice out of range");
        Signal {
            components: self.components,
            samples: end - start,
            data: self.data[start * self.components..end * self.components].to_vec(),
        }
    }

    /// Appends the samples of `other` after those of `self`.
    pub fn concat(&self, other: &Signal) -> Result<Signal> {
        if other.components != self.components {
            return Err(TvError::Dimension(format!(
                "cannot concatenate {} and {} components",
                self.components, other.components
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Signal {
            components: self.components,
            samples: self.samples + other.samples,
            data,
        })
    }

    pub fn same_shape(&self, other: &Signal) -> Result<()> {
        if self.components != other.components || self.samples != other.samples {
            return Err(TvError::ShapeMismatch {
                expected_rows: self.components,
                expected_cols: self.samples,
                rows: other.components,
                cols: other.samples,
            });
        }
        Ok(())
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Signal) -> Result<f64> {
        self.same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn frobenius_dot(&self, other: &Signal) -> Result<f64> {
        self.same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    /// Per-component sample standard deviation (population normalisation).
    pub fn component_std(&self) -> Vec<f64> {
        let n = self.samples.max(1) as f64;
        (0..self.components)
            .map(|m| {
                let mean = (0..self.samples).map(|k| self.get(m, k)).sum::<f64>() / n;
                let var = (0..self.samples)
                    .map(|k| (self.get(m, k) - mean).powi(2))
                    .sum::<f64>()
                    / n;
                var.sqrt()
            })
            .collect()
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_and_samples_agree() {
        let a = Signal::from_components(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let b = Signal::from_samples(&[vec![1.0, 4.0], vec![2.0, 5.0], vec![3.0, 6.0]]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.sample(1), &[2.0, 5.0]);
        assert_eq!(a.component(1), vec![4.0, 5.0, 6.0]);
    }

    #[test]
    fn rejects_non_finite_and_ragged() {
        assert!(matches!(
            Signal::from_samples(&[vec![1.0], vec![f64::NAN]]),
            Err(TvError::NonFinite {
                component: 0,
                sample: 1
            })
        ));
        assert!(Signal::from_samples(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(matches!(Signal::from_samples(&[]), Err(TvError::Empty)));
    }

    #[test]
    fn slice_then_concat_round_trips() {
        let s = Signal::from_univariate(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let joined = s.slice(0, 2).concat(&s.slice(2, 4)).unwrap();
        assert_eq!(joined, s);
    }
}
