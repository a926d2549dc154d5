// SPDX-License-Identifier: MIT OR Apache-2.0

//! Sample-by-sample driver running every candidate of a [`CandidateSet`]
//! and emitting segments as soon as all candidates have stopped.

use serde::{Deserialize, Serialize};

use super::bounds::{CandidateState, Step};
use super::select::{provisional_estimate, select_scored, Provisional, RunningScale};
use crate::candidates::CandidateSet;
use crate::error::{Result, TvError};
use crate::signal::Signal;

/// Per-component scale used to compare bound gaps across components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SigmaMode {
    /// Fixed scales, typically the standard deviation of the full signal.
    Offline(Vec<f64>),
    /// Running standard deviation over every sample received so far.
    Running,
}

/// How the bounds of a new segment account for the previous one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SegmentInit {
    /// Each segment starts with a zero dual before its first sample.
    Independent,
    /// Carry the dual implied by the previous change point.
    Chained,
    /// `Chained` for univariate data (where it is exact), `Independent` otherwise.
    #[default]
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub sigma: SigmaMode,
    pub init: SegmentInit,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self {
            sigma: SigmaMode::Running,
            init: SegmentInit::Auto,
        }
    }
}

impl StreamConfig {
    /// Offline scales taken from the full signal.
    pub fn offline(y: &Signal) -> Self {
        Self {
            sigma: SigmaMode::Offline(y.component_std()),
            init: SegmentInit::Auto,
        }
    }

    pub fn with_init(mut self, init: SegmentInit) -> Self {
        self.init = init;
        self
    }
}

/// A finalized piece of the approximate solution, with inclusive 0-based bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub level: Vec<f64>,
    pub zeta: Vec<f64>,
    pub q: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamResult {
    pub segments: Vec<Segment>,
    /// Estimate of the open segment just before the end of data was signalled.
    pub provisional: Option<Provisional>,
    pub samples_consumed: usize,
}

impl StreamResult {
    /// Expands the segments into an `M x N` signal.
    pub fn reconstruct(&self) -> Result<Signal> {
        let first = self.segments.first().ok_or(TvError::Empty)?;
        let m = first.level.len();
        let mut out = Signal::zeros(m, self.samples_consumed);
        let mut next = 0;
        for s in &self.segments {
            if s.start != next || s.end < s.start || s.end >= self.samples_consumed {
                return Err(TvError::State(format!(
                    "segments do not tile [0, {}): got [{}, {}] after {next}",
                    self.samples_consumed, s.start, s.end
                )));
            }
            for k in s.start..=s.end {
                out.sample_mut(k).copy_from_slice(&s.level);
            }
            next = s.end + 1;
        }
        if next != self.samples_consumed {
            return Err(TvError::State(format!(
                "segments stop at {next}, expected {}",
                self.samples_consumed
            )));
        }
        Ok(out)
    }

    /// Auxiliary vector per sample (constant on each segment), `M x N`.
    pub fn zeta_path(&self) -> Result<Signal> {
        let first = self.segments.first().ok_or(TvError::Empty)?;
        let mut out = Signal::zeros(first.zeta.len(), self.samples_consumed);
        for s in &self.segments {
            for k in s.start..=s.end.min(self.samples_consumed.saturating_sub(1)) {
                out.sample_mut(k).copy_from_slice(&s.zeta);
            }
        }
        Ok(out)
    }
}

/// Streaming solver. Feed samples with [`StreamSolver::push`], then call
/// [`StreamSolver::finish`] once the data ends.
///
/// Samples from the start of the open segment onward are kept in a shared
/// buffer so that, once a change point is placed, the samples after it can
/// be replayed into fresh candidate states.
#[derive(Debug, Clone)]
pub struct StreamSolver {
    candidates: CandidateSet,
    sigma: SigmaMode,
    chained: bool,
    components: usize,
    /// Global index of the first buffered sample (start of the open segment).
    k0: usize,
    buffer: Vec<f64>,
    /// Buffered samples already fed to the current states.
    fed: usize,
    states: Vec<CandidateState>,
    active: usize,
    carried: Option<Vec<f64>>,
    scale: RunningScale,
    consumed: usize,
    finished: bool,
}

impl StreamSolver {
    pub fn new(candidates: CandidateSet, config: StreamConfig) -> Result<Self> {
        let components = candidates.components();
        if let SigmaMode::Offline(s) = &config.sigma {
            if s.len() != components {
                return Err(TvError::Dimension(format!(
                    "sigma has {} entries for {components} components",
                    s.len()
                )));
            }
            if s.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(TvError::InvalidParameter(
                    "sigma entries must be finite and nonnegative".into(),
                ));
            }
        }
        let chained = match config.init {
            SegmentInit::Chained => true,
            SegmentInit::Independent => false,
            SegmentInit::Auto => components == 1,
        };
        Ok(Self {
            candidates,
            sigma: config.sigma,
            chained,
            components,
            k0: 0,
            buffer: Vec::new(),
            fed: 0,
            states: Vec::new(),
            active: 0,
            carried: None,
            scale: RunningScale::new(components),
            consumed: 0,
            finished: false,
        })
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn candidates(&self) -> &CandidateSet {
        &self.candidates
    }

    pub fn samples_consumed(&self) -> usize {
        self.consumed
    }

    /// Start of the open segment.
    pub fn segment_start(&self) -> usize {
        self.k0
    }

    pub fn states(&self) -> &[CandidateState] {
        &self.states
    }

    pub fn sigma(&self) -> Vec<f64> {
        match &self.sigma {
            SigmaMode::Offline(s) => s.clone(),
            SigmaMode::Running => self.scale.std(),
        }
    }

    /// Adds one sample; returns the segments finalized as a consequence.
    pub fn push(&mut self, sample: &[f64]) -> Result<Vec<Segment>> {
        if self.finished {
            return Err(TvError::State("push after finish".into()));
        }
        if sample.len() != self.components {
            return Err(TvError::Dimension(format!(
                "sample {} has {} components, expected {}",
                self.consumed,
                sample.len(),
                self.components
            )));
        }
        if let Some(i) = sample.iter().position(|v| !v.is_finite()) {
            return Err(TvError::NonFinite {
                component: i,
                sample: self.consumed,
            });
        }
        self.scale.push(sample);
        self.buffer.extend_from_slice(sample);
        self.consumed += 1;
        let mut emitted = Vec::new();
        if self.states.is_empty() {
            self.start_segment()?;
        }
        self.feed(&mut emitted)?;
        Ok(emitted)
    }

    /// Online estimate of the open segment, if any sample is pending.
    pub fn provisional(&self) -> Option<Provisional> {
        if self.finished {
            return None;
        }
        provisional_estimate(&self.states, &self.sigma())
    }

    /// Signals the end of data and flushes the remaining segments.
    pub fn finish(&mut self) -> Result<Vec<Segment>> {
        if self.finished {
            return Ok(Vec::new());
        }
        if self.consumed == 0 {
            return Err(TvError::Empty);
        }
        self.finished = true;
        let mut emitted = Vec::new();
        loop {
            for st in self.states.iter_mut() {
                st.close_at_end();
            }
            self.active = 0;
            let reached_end = self.close_segment(&mut emitted)?;
            if reached_end {
                break;
            }
            self.feed(&mut emitted)?;
        }
        self.buffer.clear();
        self.states.clear();
        Ok(emitted)
    }

    fn buffered(&self) -> usize {
        self.buffer.len() / self.components
    }

    fn start_segment(&mut self) -> Result<()> {
        let m = self.components;
        let first = &self.buffer[..m];
        let carried = self.carried.as_deref();
        if self.states.len() == self.candidates.len() {
            for st in self.states.iter_mut() {
                st.restart(self.k0, first, carried)?;
            }
        } else {
            self.states = self
                .candidates
                .iter()
                .map(|zeta| CandidateState::new(self.k0, first, zeta, carried))
                .collect::<Result<_>>()?;
        }
        self.active = self.states.len();
        self.fed = 1;
        Ok(())
    }

    /// Feeds buffered samples to the active candidates, closing segments
    /// whenever every candidate has stopped.
    fn feed(&mut self, emitted: &mut Vec<Segment>) -> Result<()> {
        loop {
            while self.fed < self.buffered() && self.active > 0 {
                let i = self.fed;
                let m = self.components;
                let sample = &self.buffer[i * m..(i + 1) * m];
                for st in self.states.iter_mut().filter(|s| s.is_active()) {
                    if st.advance(sample)? == Step::RuleOneViolated {
                        self.active -= 1;
                    }
                }
                self.fed += 1;
            }
            if self.active > 0 {
                return Ok(());
            }
            self.close_segment(emitted)?;
        }
    }

    /// Finalizes all candidates, emits the selected segment and restarts
    /// after it. Returns `true` when the emitted segment reaches the end of
    /// the data (only possible after `close_at_end`).
    fn close_segment(&mut self, emitted: &mut Vec<Segment>) -> Result<bool> {
        let sigma = self.sigma();
        let q = select_scored(self.states.iter().map(|st| {
            let k_rupt = st.rupture_index().expect("all candidates stopped");
            (
                k_rupt,
                st.gap_score(&sigma).expect("all candidates stopped"),
            )
        }))
        .ok_or(TvError::Empty)?;
        let chosen = self.states[q].finalize()?;
        let zeta = self.candidates.get(q).to_vec();
        emitted.push(Segment {
            start: self.k0,
            end: chosen.k_rupt,
            level: chosen.level,
            zeta: zeta.clone(),
            q,
        });
        if chosen.reaches_end {
            return Ok(true);
        }
        self.carried = self.chained.then(|| {
            chosen
                .directions
                .iter()
                .zip(&zeta)
                .map(|(d, z)| d.dual_sign() * z)
                .collect()
        });
        let drop = chosen.k_rupt + 1 - self.k0;
        self.buffer.drain(..drop * self.components);
        self.k0 = chosen.k_rupt + 1;
        debug_assert!(self.buffered() > 0);
        self.start_segment()?;
        Ok(false)
    }
}

/// Runs the streaming solver over a whole signal.
pub fn run_stream(
    y: &Signal,
    candidates: &CandidateSet,
    config: StreamConfig,
) -> Result<StreamResult> {
    if y.is_empty() {
        return Err(TvError::Empty);
    }
    let mut solver = StreamSolver::new(candidates.clone(), config)?;
    let mut segments = Vec::new();
    for sample in y.samples() {
        segments.extend(solver.push(sample)?);
    }
    let provisional = solver.provisional();
    segments.extend(solver.finish()?);
    Ok(StreamResult {
        segments,
        provisional,
        samples_consumed: y.len(),
    })
}
