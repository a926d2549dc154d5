// SPDX-License-Identifier: MIT OR Apache-2.0

//! Candidate sets for the piecewise-constant auxiliary variable.
//!
//! Every candidate is a nonnegative `M`-vector of Euclidean norm `lambda`.
//! The streaming solver tracks one set of primal/dual bounds per candidate.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TvError};
use crate::signal::norm;

/// Relative tolerance on `||zeta|| = lambda`.
pub const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCandidateSet")]
pub struct CandidateSet {
    lambda: f64,
    candidates: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawCandidateSet {
    lambda: f64,
    candidates: Vec<Vec<f64>>,
}

impl TryFrom<RawCandidateSet> for CandidateSet {
    type Error = TvError;

    fn try_from(raw: RawCandidateSet) -> Result<Self> {
        CandidateSet::new(raw.lambda, raw.candidates)
    }
}

/// Validates one candidate against `lambda`.
pub fn check_zeta(zeta: &[f64], lambda: f64) -> Result<()> {
    if zeta.is_empty() {
        return Err(TvError::InvalidCandidate("empty vector".into()));
    }
    if let Some(v) = zeta.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(TvError::InvalidCandidate(format!(
            "entries must be finite and nonnegative, found {v}"
        )));
    }
    let n = norm(zeta);
    if (n - lambda).abs() > NORM_TOL * lambda.max(1.0) {
        return Err(TvError::InvalidCandidate(format!(
            "norm {n} differs from lambda {lambda}"
        )));
    }
    Ok(())
}

impl CandidateSet {
    /// Validates and deduplicates (exact equality) a user-supplied list.
    pub fn new(lambda: f64, candidates: Vec<Vec<f64>>) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(TvError::InvalidParameter(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        let dim = candidates
            .first()
            .map(Vec::len)
            .ok_or_else(|| TvError::InvalidCandidate("candidate set is empty".into()))?;
        let mut unique: Vec<Vec<f64>> = Vec::with_capacity(candidates.len());
        for (i, c) in candidates.into_iter().enumerate() {
            if c.len() != dim {
                return Err(TvError::InvalidCandidate(format!(
                    "candidate {i} has dimension {}, expected {dim}",
                    c.len()
                )));
            }
            check_zeta(&c, lambda).map_err(|e| match e {
                TvError::InvalidCandidate(msg) => {
                    TvError::InvalidCandidate(format!("candidate {i}: {msg}"))
                }
                other => other,
            })?;
            if !unique.contains(&c) {
                unique.push(c);
            }
        }
        Ok(Self {
            lambda,
            candidates: unique,
        })
    }

    /// Scales a list of nonnegative directions onto the radius-`lambda` sphere.
    pub fn from_directions(lambda: f64, directions: Vec<Vec<f64>>) -> Result<Self> {
        let scaled = directions
            .into_iter()
            .map(|d| {
                let n = norm(&d);
                if !(n > 0.0) {
                    return Err(TvError::InvalidCandidate("zero direction".into()));
                }
                Ok(d.iter().map(|v| lambda * v / n).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Self::new(lambda, scaled)
    }

    /// The single balanced candidate `lambda / sqrt(M) * (1, ..., 1)`.
    pub fn single(lambda: f64, components: usize) -> Result<Self> {
        if components == 0 {
            return Err(TvError::InvalidParameter("M must be at least 1".into()));
        }
        let v = lambda / (components as f64).sqrt();
        Self::new(lambda, vec![vec![v; components]])
    }

    /// Homogeneous covering of the positive quadrant for `M = 2`:
    /// `theta_q = q pi / 2^(R+1)` for `q = 1..2^R - 1`.
    pub fn dyadic_bivariate(lambda: f64, r: u32) -> Result<Self> {
        if r < 1 {
            return Err(TvError::InvalidParameter("R must be at least 1".into()));
        }
        if r > 24 {
            return Err(TvError::InvalidParameter(format!("R = {r} is too large")));
        }
        let count = (1u64 << r) - 1;
        let denom = (1u64 << (r + 1)) as f64;
        let candidates = (1..=count)
            .map(|q| {
                let theta = q as f64 * std::f64::consts::PI / denom;
                vec![lambda * theta.cos(), lambda * theta.sin()]
            })
            .collect();
        Self::new(lambda, candidates)
    }

    /// Random covering of the nonnegative part of the sphere.
    ///
    /// For `M = 2` the angle is uniform on `[0, pi/2]`. For other `M` each
    /// candidate is `lambda |g| / ||g||` with `g` standard Gaussian, which is
    /// uniform on the nonnegative orthant of the sphere.
    pub fn random_directions(
        lambda: f64,
        components: usize,
        count: usize,
        seed: u64,
    ) -> Result<Self> {
        if count < 1 {
            return Err(TvError::InvalidParameter("count must be at least 1".into()));
        }
        if components == 0 {
            return Err(TvError::InvalidParameter("M must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let candidates = (0..count)
            .map(|_| match components {
                1 => vec![lambda],
                2 => {
                    let theta = rng.random_range(0.0..=FRAC_PI_2);
                    vec![lambda * theta.cos(), lambda * theta.sin()]
                }
                _ => loop {
                    let g: Vec<f64> = (0..components)
                        .map(|_| StandardNormal.sample(&mut rng))
                        .map(|v: f64| v.abs())
                        .collect();
                    let n = norm(&g);
                    if n > 0.0 {
                        break g.iter().map(|v| lambda * v / n).collect();
                    }
                },
            })
            .collect();
        Self::new(lambda, candidates)
    }

    /// Bivariate covering with Gaussian angles, truncated to `[0, pi/2]` by
    /// rejection. Useful when one component is known to dominate.
    pub fn gaussian_angles(
        lambda: f64,
        count: usize,
        mean: f64,
        std: f64,
        seed: u64,
    ) -> Result<Self> {
        if count < 1 {
            return Err(TvError::InvalidParameter("count must be at least 1".into()));
        }
        if !(0.0..=FRAC_PI_2).contains(&mean) {
            return Err(TvError::InvalidParameter(format!(
                "mean angle {mean} outside [0, pi/2]"
            )));
        }
        let normal = Normal::new(mean, std)
            .map_err(|e| TvError::InvalidParameter(format!("angle distribution: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let candidates = (0..count)
            .map(|_| {
                let theta = loop {
                    let t = normal.sample(&mut rng);
                    if (0.0..=FRAC_PI_2).contains(&t) {
                        break t;
                    }
                };
                vec![lambda * theta.cos(), lambda * theta.sin()]
            })
            .collect();
        Self::new(lambda, candidates)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn components(&self) -> usize {
        self.candidates[0].len()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn get(&self, q: usize) -> &[f64] {
        &self.candidates[q]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.candidates.iter().map(Vec::as_slice)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("candidate set serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| TvError::InvalidCandidate(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TvError::InvalidParameter(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
