// SPDX-License-Identifier: MIT OR Apache-2.0

//! Choosing among candidates: tightest normalised bound gap wins.

use super::bounds::CandidateState;

/// Floor applied to per-component scales before dividing by them.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// What [`select_candidate`] needs to know about each finalized candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionEntry {
    pub k_rupt: usize,
    /// `x_hi - x_lo` per component.
    pub gap: Vec<f64>,
}

/// `|| gap / sigma ||^2`.
pub fn normalized_gap(gap: &[f64], sigma: &[f64]) -> f64 {
    gap.iter()
        .zip(sigma)
        .map(|(g, s)| (g / s.max(SIGMA_FLOOR)).powi(2))
        .sum()
}

/// Index of the candidate with the smallest normalised gap. Ties go to the
/// largest `k_rupt`, then to the smallest index. Returns `None` on an empty list.
pub fn select_candidate(entries: &[SelectionEntry], sigma: &[f64]) -> Option<usize> {
    select_scored(
        entries
            .iter()
            .map(|e| (e.k_rupt, normalized_gap(&e.gap, sigma))),
    )
}

/// [`select_candidate`] on precomputed `(k_rupt, score)` pairs.
pub fn select_scored<I: IntoIterator<Item = (usize, f64)>>(entries: I) -> Option<usize> {
    let mut best: Option<(usize, f64, usize)> = None;
    for (q, (k_rupt, score)) in entries.into_iter().enumerate() {
        let better = match best {
            None => true,
            Some((_, s, k)) => score < s || (score == s && k_rupt > k),
        };
        if better {
            best = Some((q, score, k_rupt));
        }
    }
    best.map(|(q, _, _)| q)
}

/// Online level of the open segment.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Provisional {
    pub start: usize,
    /// Last sample index seen.
    pub k: usize,
    pub level: Vec<f64>,
    pub q: usize,
}

/// Picks the active candidate with the tightest normalised gap at its
/// current index and closes its segment with a zero dual after the last
/// sample. Returns `None` when no candidate is active.
pub fn provisional_estimate<'a, I>(states: I, sigma: &[f64]) -> Option<Provisional>
where
    I: IntoIterator<Item = &'a CandidateState>,
{
    let mut best: Option<(usize, f64, &CandidateState)> = None;
    for (q, st) in states.into_iter().enumerate() {
        if !st.is_active() {
            continue;
        }
        let gap: Vec<f64> = st
            .x_hi()
            .iter()
            .zip(st.x_lo())
            .map(|(h, l)| h - l)
            .collect();
        let score = normalized_gap(&gap, sigma);
        if best.as_ref().is_none_or(|(_, s, _)| score < *s) {
            best = Some((q, score, st));
        }
    }
    best.map(|(q, _, st)| Provisional {
        start: st.k0(),
        k: st.k(),
        level: st.closure_level(),
        q,
    })
}

/// Welford running mean/variance per component.
#[derive(Debug, Clone)]
pub struct RunningScale {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningScale {
    pub fn new(components: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; components],
            m2: vec![0.0; components],
        }
    }

    pub fn push(&mut self, sample: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for (i, v) in sample.iter().enumerate() {
            let delta = v - self.mean[i];
            self.mean[i] += delta / n;
            self.m2[i] += delta * (v - self.mean[i]);
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Population standard deviation, floored at [`SIGMA_FLOOR`].
    pub fn std(&self) -> Vec<f64> {
        let n = self.count.max(1) as f64;
        self.m2
            .iter()
            .map(|m2| (m2 / n).sqrt().max(SIGMA_FLOOR))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(k: usize, gap: &[f64]) -> SelectionEntry {
        SelectionEntry {
            k_rupt: k,
            gap: gap.to_vec(),
        }
    }

    #[test]
    fn singleton_is_selected() {
        assert_eq!(select_candidate(&[entry(3, &[1.0])], &[1.0]), Some(0));
        assert_eq!(select_candidate(&[], &[1.0]), None);
    }

    #[test]
    fn ties_prefer_latest_change_point() {
        let e = [
            entry(10, &[1.0, 2.0]),
            entry(14, &[2.0, 1.0]),
            entry(14, &[1.0, 2.0]),
        ];
        assert_eq!(select_candidate(&e, &[1.0, 1.0]), Some(1));
    }

    #[test]
    fn tightest_gap_wins() {
        let e = [entry(10, &[1.0, 2.0]), entry(4, &[0.5, 0.5])];
        assert_eq!(select_candidate(&e, &[1.0, 1.0]), Some(1));
        // rescaling the second component changes which gap is tight
        let e = [entry(10, &[1.0, 0.5]), entry(4, &[0.2, 0.9])];
        assert_eq!(select_candidate(&e, &[1.0, 1.0]), Some(1));
        assert_eq!(select_candidate(&e, &[1.0, 0.01]), Some(0));
    }

    #[test]
    fn welford_matches_two_pass() {
        let xs = [[1.0, 10.0], [2.0, 30.0], [4.0, 20.0], [8.0, 0.0]];
        let mut r = RunningScale::new(2);
        xs.iter().for_each(|s| r.push(s));
        let mean0 = 15.0 / 4.0;
        let var0 = xs.iter().map(|s| (s[0] - mean0).powi(2)).sum::<f64>() / 4.0;
        assert!((r.std()[0] - var0.sqrt()).abs() < 1e-12);
        let single = {
            let mut r = RunningScale::new(1);
            r.push(&[3.0]);
            r.std()
        };
        assert_eq!(single, vec![SIGMA_FLOOR]);
    }
}
