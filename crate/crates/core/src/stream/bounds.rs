// SPDX-License-Identifier: MIT OR Apache-2.0

//! Per-candidate primal/dual bound tracking.
//!
//! A [`CandidateState`] follows one segment starting at `k0` under a fixed
//! (or externally supplied, time-varying) auxiliary vector `zeta`. For every
//! component it keeps the lower/upper bounds of the unknown level
//! (`x_lo <= x <= x_hi`) and the matching dual bounds (`u_hi <= u <= u_lo`).
//!
//! All indices are 0-based sample positions in the full stream.

use crate::candidates::check_zeta;
use crate::error::{Result, TvError};

/// Sign of the amplitude change closing a segment on one component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Direction {
    /// Negative jump: the level is given by the lower bound, `u = +zeta`.
    Down,
    /// Positive jump: the level is given by the upper bound, `u = -zeta`.
    Up,
}

impl Direction {
    /// Dual value at the change point, as a multiple of `zeta`.
    pub fn dual_sign(self) -> f64 {
        match self {
            Direction::Down => 1.0,
            Direction::Up => -1.0,
        }
    }
}

/// Index at which a bound was clamped, with the bound value right after.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Revision {
    pub index: usize,
    pub level: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Active,
    /// The prolongation condition failed when sample `at` arrived.
    Violated {
        at: usize,
    },
    /// End of data reached with the zero closing dual admissible.
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Continue,
    RuleOneViolated,
}

/// Result of closing a candidate's segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Finalized {
    /// Last index of the segment.
    pub k_rupt: usize,
    pub level: Vec<f64>,
    pub directions: Vec<Direction>,
    /// `x_hi - x_lo` in effect at `k_rupt`; drives candidate selection.
    pub gap: Vec<f64>,
    /// `true` when the segment runs to the end of the data.
    pub reaches_end: bool,
}

#[derive(Debug, Clone)]
pub struct CandidateState {
    zeta: Vec<f64>,
    k0: usize,
    k: usize,
    x_lo: Vec<f64>,
    x_hi: Vec<f64>,
    u_lo: Vec<f64>,
    u_hi: Vec<f64>,
    rev_lo: Vec<Vec<Revision>>,
    rev_hi: Vec<Vec<Revision>>,
    threshold: Vec<f64>,
    status: Status,
}

impl CandidateState {
    /// Starts a segment at `k0` from its first sample.
    ///
    /// `carried` is the dual value at `k0 - 1`; `None` treats the segment
    /// independently of its predecessor (`u_{k0-1} = 0`).
    pub fn new(k0: usize, y_k0: &[f64], zeta: &[f64], carried: Option<&[f64]>) -> Result<Self> {
        let lambda = crate::signal::norm(zeta);
        if !(lambda > 0.0) {
            return Err(TvError::InvalidCandidate("zeta must be nonzero".into()));
        }
        check_zeta(zeta, lambda)?;
        Self::with_weights(k0, y_k0, zeta, carried)
    }

    /// Like [`CandidateState::new`] but without the sphere constraint, for
    /// arbitrary nonnegative per-component weights.
    pub(crate) fn with_weights(
        k0: usize,
        y_k0: &[f64],
        zeta: &[f64],
        carried: Option<&[f64]>,
    ) -> Result<Self> {
        let m = zeta.len();
        if y_k0.len() != m {
            return Err(TvError::Dimension(format!(
                "sample has {} components, candidate has {m}",
                y_k0.len()
            )));
        }
        if zeta.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(TvError::InvalidCandidate(
                "weights must be finite and nonnegative".into(),
            ));
        }
        if let Some(c) = carried {
            if c.len() != m {
                return Err(TvError::Dimension(format!(
                    "carried dual has {} components, expected {m}",
                    c.len()
                )));
            }
        }
        let mut st = Self {
            zeta: zeta.to_vec(),
            k0,
            k: k0,
            x_lo: vec![0.0; m],
            x_hi: vec![0.0; m],
            u_lo: vec![0.0; m],
            u_hi: vec![0.0; m],
            rev_lo: vec![Vec::new(); m],
            rev_hi: vec![Vec::new(); m],
            threshold: vec![0.0; m],
            status: Status::Active,
        };
        st.reset(k0, y_k0, carried);
        Ok(st)
    }

    /// Starts a new segment at `k0` with the same `zeta`, reusing storage.
    pub fn restart(&mut self, k0: usize, y_k0: &[f64], carried: Option<&[f64]>) -> Result<()> {
        let m = self.zeta.len();
        if y_k0.len() != m || carried.is_some_and(|c| c.len() != m) {
            return Err(TvError::Dimension(format!("expected {m} components")));
        }
        self.reset(k0, y_k0, carried);
        Ok(())
    }

    fn reset(&mut self, k0: usize, y_k0: &[f64], carried: Option<&[f64]>) {
        self.k0 = k0;
        self.k = k0;
        self.status = Status::Active;
        for i in 0..self.zeta.len() {
            let c = carried.map_or(0.0, |c| c[i]);
            let z = self.zeta[i];
            self.x_lo[i] = y_k0[i] - z + c;
            self.x_hi[i] = y_k0[i] + z + c;
            self.u_lo[i] = z;
            self.u_hi[i] = -z;
            self.threshold[i] = z;
            self.rev_lo[i].clear();
            self.rev_lo[i].push(Revision {
                index: k0,
                level: self.x_lo[i],
            });
            self.rev_hi[i].clear();
            self.rev_hi[i].push(Revision {
                index: k0,
                level: self.x_hi[i],
            });
        }
    }

    pub fn zeta(&self) -> &[f64] {
        &self.zeta
    }

    pub fn k0(&self) -> usize {
        self.k0
    }

    /// Index of the last sample seen by this candidate.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn x_lo(&self) -> &[f64] {
        &self.x_lo
    }

    pub fn x_hi(&self) -> &[f64] {
        &self.x_hi
    }

    pub fn u_lo(&self) -> &[f64] {
        &self.u_lo
    }

    pub fn u_hi(&self) -> &[f64] {
        &self.u_hi
    }

    pub fn rev_lo(&self, m: usize) -> &[Revision] {
        &self.rev_lo[m]
    }

    pub fn rev_hi(&self, m: usize) -> &[Revision] {
        &self.rev_hi[m]
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn is_active(&self) -> bool {
        self.status == Status::Active
    }

    /// Number of samples in the current segment.
    pub fn segment_len(&self) -> usize {
        self.k - self.k0 + 1
    }

    /// Processes the next sample with this candidate's own `zeta`.
    pub fn advance(&mut self, y_next: &[f64]) -> Result<Step> {
        let zeta = std::mem::take(&mut self.zeta);
        let step = self.advance_with(y_next, &zeta);
        self.zeta = zeta;
        step
    }

    /// Processes the next sample with an explicit bound `zeta_next` on the
    /// dual at that sample.
    pub fn advance_with(&mut self, y_next: &[f64], zeta_next: &[f64]) -> Result<Step> {
        if self.status != Status::Active {
            return Err(TvError::State(format!(
                "advance called on a {:?} candidate",
                self.status
            )));
        }
        let m = self.x_lo.len();
        if y_next.len() != m || zeta_next.len() != m {
            return Err(TvError::Dimension(format!(
                "expected {m} components, got sample {} / zeta {}",
                y_next.len(),
                zeta_next.len()
            )));
        }
        let next = self.k + 1;
        let mut violated = false;
        for i in 0..m {
            self.u_lo[i] += y_next[i] - self.x_lo[i];
            self.u_hi[i] += y_next[i] - self.x_hi[i];
            if self.u_lo[i] < -zeta_next[i] || self.u_hi[i] > zeta_next[i] {
                violated = true;
            }
        }
        self.k = next;
        if violated {
            self.threshold.copy_from_slice(zeta_next);
            self.status = Status::Violated { at: next };
            return Ok(Step::RuleOneViolated);
        }

        let count = (next - self.k0 + 1) as f64;
        for i in 0..m {
            if self.u_lo[i] > zeta_next[i] {
                self.x_lo[i] += (self.u_lo[i] - zeta_next[i]) / count;
                self.u_lo[i] = zeta_next[i];
                self.rev_lo[i].push(Revision {
                    index: next,
                    level: self.x_lo[i],
                });
            }
            if self.u_hi[i] < -zeta_next[i] {
                self.x_hi[i] += (self.u_hi[i] + zeta_next[i]) / count;
                self.u_hi[i] = -zeta_next[i];
                self.rev_hi[i].push(Revision {
                    index: next,
                    level: self.x_hi[i],
                });
            }
        }
        debug_assert!(self.bounds_ordered(), "bound ordering violated at {next}");
        Ok(Step::Continue)
    }

    /// `x_lo <= x_hi` and `u_hi <= u_lo` componentwise (up to rounding).
    pub fn bounds_ordered(&self) -> bool {
        let scale = |a: f64, b: f64| 1e-9 * (1.0 + a.abs().max(b.abs()));
        (0..self.x_lo.len()).all(|i| {
            self.x_lo[i] <= self.x_hi[i] + scale(self.x_lo[i], self.x_hi[i])
                && self.u_hi[i] <= self.u_lo[i] + scale(self.u_lo[i], self.u_hi[i])
        })
    }

    /// Level of the segment if the data ended now, i.e. with a zero dual
    /// after the last sample: the running mean clamped to `[x_lo, x_hi]`.
    pub fn closure_level(&self) -> Vec<f64> {
        let n = self.segment_len() as f64;
        (0..self.x_lo.len())
            .map(|i| (self.x_lo[i] + self.u_lo[i] / n).clamp(self.x_lo[i], self.x_hi[i]))
            .collect()
    }

    /// Applies the end-of-data boundary (zero dual after the last sample).
    /// Returns `true` when the segment can simply run to the end.
    pub fn close_at_end(&mut self) -> bool {
        if self.status != Status::Active {
            return false;
        }
        let violated = (0..self.x_lo.len()).any(|i| self.u_lo[i] < 0.0 || self.u_hi[i] > 0.0);
        if violated {
            self.threshold.iter_mut().for_each(|t| *t = 0.0);
            self.status = Status::Violated { at: self.k + 1 };
        } else {
            self.status = Status::Closed;
        }
        !violated
    }

    /// Jump direction per component for a violated candidate.
    pub fn directions(&self) -> Vec<Direction> {
        (0..self.x_lo.len()).map(|i| self.direction(i)).collect()
    }

    fn direction(&self, i: usize) -> Direction {
        if self.u_lo[i] < -self.threshold[i] {
            Direction::Down
        } else if self.u_hi[i] > self.threshold[i] {
            Direction::Up
        } else if self.u_lo[i] + self.u_hi[i] < 0.0 {
            Direction::Down
        } else {
            Direction::Up
        }
    }

    fn log(&self, i: usize) -> &[Revision] {
        match self.direction(i) {
            Direction::Down => &self.rev_lo[i],
            Direction::Up => &self.rev_hi[i],
        }
    }

    /// Change-point index [`CandidateState::finalize`] would report, without
    /// allocating. `None` while the candidate is active.
    pub fn rupture_index(&self) -> Option<usize> {
        match self.status {
            Status::Active => None,
            Status::Closed => Some(self.k),
            Status::Violated { .. } => {
                let m = self.x_lo.len();
                // walk down to an index present in every log
                let mut t = (0..m)
                    .map(|i| self.log(i).last().map_or(self.k0, |r| r.index))
                    .min()?;
                loop {
                    let mut next = t;
                    for i in 0..m {
                        let log = self.log(i);
                        let pos = log.partition_point(|r| r.index <= t);
                        next = next.min(if pos == 0 {
                            self.k0
                        } else {
                            log[pos - 1].index
                        });
                    }
                    if next == t {
                        return Some(t);
                    }
                    t = next;
                }
            }
        }
    }

    /// Bound gap `x_hi - x_lo` per component at the change point. For a
    /// violated candidate the bounds are the ones in effect at `k_rupt`.
    fn gap_at(&self, k_rupt: usize) -> impl Iterator<Item = f64> + '_ {
        let violated = matches!(self.status, Status::Violated { .. });
        (0..self.x_lo.len()).map(move |i| {
            if violated {
                level_at(&self.rev_hi[i], k_rupt) - level_at(&self.rev_lo[i], k_rupt)
            } else {
                self.x_hi[i] - self.x_lo[i]
            }
        })
    }

    /// `|| (x_hi - x_lo) / sigma ||^2` at the change point; `None` while active.
    pub fn gap_score(&self, sigma: &[f64]) -> Option<f64> {
        let k_rupt = self.rupture_index()?;
        Some(
            self.gap_at(k_rupt)
                .zip(sigma)
                .map(|(g, s)| (g / s.max(super::select::SIGMA_FLOOR)).powi(2))
                .sum(),
        )
    }

    /// Change-point location and segment level for a stopped candidate.
    pub fn finalize(&self) -> Result<Finalized> {
        match self.status {
            Status::Active => Err(TvError::State(
                "finalize called on an active candidate".into(),
            )),
            Status::Closed => Ok(Finalized {
                k_rupt: self.k,
                gap: self.gap_at(self.k).collect(),
                level: self.closure_level(),
                directions: self.directions(),
                reaches_end: true,
            }),
            Status::Violated { .. } => {
                let directions = self.directions();
                let logs: Vec<&[Revision]> = (0..directions.len()).map(|i| self.log(i)).collect();
                let k_rupt = latest_common_index(&logs).unwrap_or(self.k0);
                debug_assert_eq!(Some(k_rupt), self.rupture_index());
                let level = logs.iter().map(|log| level_at(log, k_rupt)).collect();
                Ok(Finalized {
                    k_rupt,
                    level,
                    directions,
                    gap: self.gap_at(k_rupt).collect(),
                    reaches_end: false,
                })
            }
        }
    }
}

/// Largest index present in every (ascending) log.
///
/// Every log starts with the segment start, so the intersection is never
/// empty for logs produced by [`CandidateState`].
pub fn latest_common_index(logs: &[&[Revision]]) -> Option<usize> {
    let (first, rest) = logs.split_first()?;
    first.iter().rev().map(|r| r.index).find(|idx| {
        rest.iter()
            .all(|log| log.binary_search_by_key(idx, |r| r.index).is_ok())
    })
}

/// Bound value in effect at `index` according to an ascending log.
fn level_at(log: &[Revision], index: usize) -> f64 {
    let pos = log.partition_point(|r| r.index <= index);
    log[pos.saturating_sub(1)].level
}
