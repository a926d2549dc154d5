// SPDX-License-Identifier: MIT OR Apache-2.0

//! Monte-Carlo comparison of the streaming solver against the exact and
//! windowed solvers.
//!
//! Realization `r` draws its clean signal and noise from a ChaCha8 stream
//! `r` under the config seed, so every cell of the grid sees the same data
//! whatever the thread scheduling.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candidates::CandidateSet;
use crate::error::{Result, TvError};
use crate::eval::{
    add_noise_with, generate_piecewise_with, mean, median, mse, smoothed_jaccard, stream_indicator,
};
use crate::reference::{solve_exact, ExactOptions, WindowedSolver};
use crate::signal::Signal;
use crate::stream::{SegmentInit, SigmaMode, StreamConfig, StreamResult, StreamSolver};

fn default_oracle_tol() -> f64 {
    1e-10
}

fn default_window_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub m: usize,
    pub n: usize,
    pub snr_db: f64,
    pub realizations: usize,
    pub seed: u64,
    pub lambdas: Vec<f64>,
    /// Candidate-set sizes for the offline MSE curves.
    #[serde(default)]
    pub q_sizes: Vec<usize>,
    /// Candidate-set sizes for the online cost and Jaccard curves.
    #[serde(default)]
    pub online_q_sizes: Vec<usize>,
    /// Window lengths of the windowed baseline.
    #[serde(default)]
    pub windows: Vec<usize>,
    #[serde(default = "default_oracle_tol")]
    pub oracle_rel_tol: f64,
    #[serde(default = "default_window_tol")]
    pub window_rel_tol: f64,
    #[serde(default)]
    pub warm_start: bool,
}

impl BenchConfig {
    /// Checks value ranges; the error names the offending field.
    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, why: &str| Err(TvError::InvalidParameter(format!("{path}: {why}")));
        if self.m == 0 {
            return bad("m", "must be at least 1");
        }
        if self.n < 2 {
            return bad("n", "must be at least 2");
        }
        if !(self.snr_db.is_finite() || self.snr_db == f64::INFINITY) {
            return bad("snr_db", "must be a number");
        }
        if self.realizations == 0 {
            return bad("realizations", "must be at least 1");
        }
        if self.lambdas.is_empty() {
            return bad("lambdas", "must not be empty");
        }
        for (i, l) in self.lambdas.iter().enumerate() {
            if !(*l > 0.0 && l.is_finite()) {
                return bad(&format!("lambdas[{i}]"), "must be positive");
            }
        }
        for (name, list) in [
            ("q_sizes", &self.q_sizes),
            ("online_q_sizes", &self.online_q_sizes),
            ("windows", &self.windows),
        ] {
            if let Some(i) = list.iter().position(|v| *v == 0) {
                return bad(&format!("{name}[{i}]"), "must be at least 1");
            }
        }
        if self.q_sizes.is_empty() && self.online_q_sizes.is_empty() && self.windows.is_empty() {
            return bad("q_sizes", "nothing to run");
        }
        for (name, tol) in [
            ("oracle_rel_tol", self.oracle_rel_tol),
            ("window_rel_tol", self.window_rel_tol),
        ] {
            if !(tol > 0.0) {
                return bad(name, "must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseCell {
    pub lambda: f64,
    pub q_size: usize,
    /// One value per realization.
    pub values: Vec<f64>,
    pub median: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Stream { q_size: usize },
    Window { k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineCell {
    pub lambda: f64,
    pub method: Method,
    pub jaccard: Vec<f64>,
    pub mean_jaccard: f64,
    /// Median over all samples of all realizations (timing field).
    pub median_cost_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub mse: Vec<MseCell>,
    pub online: Vec<OnlineCell>,
}

impl BenchReport {
    pub fn mse_cell(&self, lambda: f64, q_size: usize) -> Option<&MseCell> {
        self.mse
            .iter()
            .find(|c| c.lambda == lambda && c.q_size == q_size)
    }

    pub fn online_cell(&self, lambda: f64, method: Method) -> Option<&OnlineCell> {
        self.online
            .iter()
            .find(|c| c.lambda == lambda && c.method == method)
    }

    /// Copy with every timing field zeroed, for reproducibility checks.
    pub fn without_timings(&self) -> Self {
        let mut out = self.clone();
        out.online
            .iter_mut()
            .for_each(|c| c.median_cost_seconds = 0.0);
        out
    }
}

/// Clean signal, its change indicator and the noisy observation for one realization.
pub struct Realization {
    pub clean: Signal,
    pub truth: Vec<f64>,
    pub noisy: Signal,
}

pub fn realization(config: &BenchConfig, index: usize) -> Result<Realization> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);
    let pc = generate_piecewise_with(config.m, config.n, &mut rng)?;
    let noisy = add_noise_with(&pc.x, config.snr_db, &mut rng)?;
    let truth = pc.indicator();
    Ok(Realization {
        clean: pc.x,
        truth,
        noisy,
    })
}

/// Candidate set of a given size used by the benchmark: random directions
/// seeded by the config seed and the size.
pub fn bench_candidates(lambda: f64, m: usize, size: usize, seed: u64) -> Result<CandidateSet> {
    if m == 1 {
        return CandidateSet::single(lambda, 1);
    }
    CandidateSet::random_directions(
        lambda,
        m,
        size,
        seed ^ (size as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
    )
}

/// Runs the streaming solver and records the wall-clock time of every push.
pub fn timed_stream(
    y: &Signal,
    candidates: &CandidateSet,
    config: StreamConfig,
) -> Result<(StreamResult, Vec<f64>)> {
    let mut solver = StreamSolver::new(candidates.clone(), config)?;
    let mut segments = Vec::new();
    let mut seconds = Vec::with_capacity(y.len());
    for sample in y.samples() {
        let t0 = Instant::now();
        segments.extend(solver.push(sample)?);
        seconds.push(t0.elapsed().as_secs_f64());
    }
    let provisional = solver.provisional();
    let t0 = Instant::now();
    segments.extend(solver.finish()?);
    if let Some(last) = seconds.last_mut() {
        *last += t0.elapsed().as_secs_f64();
    }
    Ok((
        StreamResult {
            segments,
            provisional,
            samples_consumed: y.len(),
        },
        seconds,
    ))
}

pub fn run_bench(config: &BenchConfig) -> Result<BenchReport> {
    config.validate()?;
    let data: Vec<Realization> = (0..config.realizations)
        .into_par_iter()
        .map(|r| realization(config, r))
        .collect::<Result<_>>()?;

    let mse = if config.q_sizes.is_empty() {
        Vec::new()
    } else {
        offline_cells(config, &data)?
    };
    let online = online_cells(config, &data)?;
    Ok(BenchReport {
        config: config.clone(),
        mse,
        online,
    })
}

fn offline_cells(config: &BenchConfig, data: &[Realization]) -> Result<Vec<MseCell>> {
    let oracle_opts = ExactOptions::with_rel_tol(config.oracle_rel_tol);
    let jobs: Vec<(usize, usize)> = (0..config.lambdas.len())
        .flat_map(|l| (0..data.len()).map(move |r| (l, r)))
        .collect();
    let oracles: Vec<Signal> = jobs
        .par_iter()
        .map(|&(l, r)| solve_exact(&data[r].noisy, config.lambdas[l], oracle_opts).map(|s| s.x))
        .collect::<Result<_>>()?;

    let cells: Vec<(usize, usize)> = (0..config.lambdas.len())
        .flat_map(|l| (0..config.q_sizes.len()).map(move |q| (l, q)))
        .collect();
    cells
        .par_iter()
        .map(|&(l, qi)| {
            let lambda = config.lambdas[l];
            let q_size = config.q_sizes[qi];
            let cands = bench_candidates(lambda, config.m, q_size, config.seed)?;
            let values = (0..data.len())
                .map(|r| {
                    let y = &data[r].noisy;
                    let cfg = StreamConfig {
                        sigma: SigmaMode::Offline(y.component_std()),
                        init: SegmentInit::Auto,
                    };
                    let approx = crate::stream::run_stream(y, &cands, cfg)?.reconstruct()?;
                    mse(&approx, &oracles[l * data.len() + r])
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(MseCell {
                lambda,
                q_size,
                median: median(&values).expect("at least one realization"),
                mean: mean(&values).expect("at least one realization"),
                values,
            })
        })
        .collect()
}

fn online_cells(config: &BenchConfig, data: &[Realization]) -> Result<Vec<OnlineCell>> {
    let mut methods: Vec<Method> = config
        .online_q_sizes
        .iter()
        .map(|&q_size| Method::Stream { q_size })
        .collect();
    methods.extend(config.windows.iter().map(|&k| Method::Window { k }));
    let cells: Vec<(f64, Method)> = config
        .lambdas
        .iter()
        .flat_map(|&l| methods.iter().map(move |m| (l, *m)))
        .collect();
    let window_opts = ExactOptions::with_rel_tol(config.window_rel_tol);
    // cells run one at a time so that timings do not compete for cores
    cells
        .iter()
        .map(|&(lambda, method)| {
            let mut costs = Vec::new();
            let mut jaccard = Vec::with_capacity(data.len());
            for real in data {
                let (indicator, seconds) = match method {
                    Method::Stream { q_size } => {
                        let cands = bench_candidates(lambda, config.m, q_size, config.seed)?;
                        let (res, secs) =
                            timed_stream(&real.noisy, &cands, StreamConfig::default())?;
                        (stream_indicator(&res), secs)
                    }
                    Method::Window { k } => {
                        let mut solver = WindowedSolver::new(lambda, k, window_opts);
                        solver.warm_start = config.warm_start;
                        let run = solver.run(&real.noisy)?;
                        (
                            run.newest_jumps.iter().map(|&v| v as f64).collect(),
                            run.seconds,
                        )
                    }
                };
                costs.extend(seconds);
                jaccard.push(smoothed_jaccard(&indicator, &real.truth)?);
            }
            Ok(OnlineCell {
                lambda,
                method,
                mean_jaccard: mean(&jaccard).expect("at least one realization"),
                jaccard,
                median_cost_seconds: median(&costs).unwrap_or(0.0),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> BenchConfig {
        BenchConfig {
            m: 2,
            n: 60,
            snr_db: 10.0,
            realizations: 1,
            seed: 5,
            lambdas: vec![3.0],
            q_sizes: vec![4],
            online_q_sizes: vec![4],
            windows: vec![10],
            oracle_rel_tol: 1e-10,
            window_rel_tol: 1e-6,
            warm_start: false,
        }
    }

    #[test]
    fn minimal_config_gives_one_cell_per_curve() {
        let report = run_bench(&tiny()).unwrap();
        assert_eq!(report.mse.len(), 1);
        assert_eq!(report.online.len(), 2);
        assert_eq!(report.mse[0].values.len(), 1);
        assert!(report.online_cell(3.0, Method::Window { k: 10 }).is_some());
    }

    #[test]
    fn report_is_reproducible() {
        let a = run_bench(&tiny()).unwrap().without_timings();
        let b = run_bench(&tiny()).unwrap().without_timings();
        assert_eq!(a, b);
    }

    #[test]
    fn validation_names_the_field() {
        let mut c = tiny();
        c.lambdas = vec![1.0, -2.0];
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("lambdas[1]"), "{err}");
        let mut c = tiny();
        c.realizations = 0;
        assert!(c
            .validate()
            .unwrap_err()
            .to_string()
            .contains("realizations"));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"m":2,"n":10,"snr_db":3,"realizations":1,"seed":0,"lambdas":[1],"bogus":1}"#;
        assert!(serde_json::from_str::<BenchConfig>(text).is_err());
    }
}
