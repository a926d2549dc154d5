// SPDX-License-Identifier: MIT OR Apache-2.0

//! Python bindings. Signals cross the boundary as lists of samples, each a
//! list of `M` floats.

use mvtv_core::{
    eval, DualCertificate, KktOptions, SegmentInit, SigmaMode, Signal, StreamConfig, TvError,
};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: TvError) -> PyErr {
    match e {
        TvError::NotConverged { .. } | TvError::State(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn signal(samples: Vec<Vec<f64>>) -> PyResult<Signal> {
    Signal::from_samples(&samples).map_err(to_py)
}

fn config(sigma: &str, chained: bool, y: Option<&Signal>) -> PyResult<StreamConfig> {
    let sigma = match (sigma, y) {
        ("running", _) => SigmaMode::Running,
        ("offline", Some(y)) => SigmaMode::Offline(y.component_std()),
        ("offline", None) => {
            return Err(PyValueError::new_err(
                "offline sigma needs the whole signal",
            ))
        }
        _ => {
            return Err(PyValueError::new_err(format!(
                "sigma must be 'running' or 'offline', got '{sigma}'"
            )))
        }
    };
    let init = if chained {
        SegmentInit::Chained
    } else {
        SegmentInit::Auto
    };
    Ok(StreamConfig { sigma, init })
}

/// Finite set of candidate vectors on the nonnegative sphere of radius lambda.
#[pyclass(name = "CandidateSet", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCandidateSet(mvtv_core::CandidateSet);

#[pymethods]
impl PyCandidateSet {
    #[new]
    fn new(lambda: f64, candidates: Vec<Vec<f64>>) -> PyResult<Self> {
        mvtv_core::CandidateSet::new(lambda, candidates)
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    fn single(lambda: f64, components: usize) -> PyResult<Self> {
        mvtv_core::CandidateSet::single(lambda, components)
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    fn dyadic(lambda: f64, r: u32) -> PyResult<Self> {
        mvtv_core::CandidateSet::dyadic_bivariate(lambda, r)
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (lambda, components, count, seed=0))]
    fn random(lambda: f64, components: usize, count: usize, seed: u64) -> PyResult<Self> {
        mvtv_core::CandidateSet::random_directions(lambda, components, count, seed)
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        mvtv_core::CandidateSet::from_json(text)
            .map(Self)
            .map_err(to_py)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    #[getter]
    fn lambda_(&self) -> f64 {
        self.0.lambda()
    }

    #[getter]
    fn components(&self) -> usize {
        self.0.components()
    }

    fn candidates(&self) -> Vec<Vec<f64>> {
        self.0.iter().map(<[f64]>::to_vec).collect()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// A finalized constant piece `[start, end]` with its level and candidate.
#[pyclass(name = "Segment", get_all, frozen)]
struct PySegment {
    start: usize,
    end: usize,
    level: Vec<f64>,
    zeta: Vec<f64>,
    q: usize,
}

impl From<mvtv_core::Segment> for PySegment {
    fn from(s: mvtv_core::Segment) -> Self {
        Self {
            start: s.start,
            end: s.end,
            level: s.level,
            zeta: s.zeta,
            q: s.q,
        }
    }
}

#[pymethods]
impl PySegment {
    fn __repr__(&self) -> String {
        format!(
            "Segment(start={}, end={}, level={:?}, q={})",
            self.start, self.end, self.level, self.q
        )
    }
}

/// Incremental solver: push samples one at a time, collect segments as they close.
#[pyclass(name = "StreamSolver")]
struct PyStreamSolver(mvtv_core::StreamSolver);

#[pymethods]
impl PyStreamSolver {
    #[new]
    #[pyo3(signature = (candidates, chained_init=false))]
    fn new(candidates: &PyCandidateSet, chained_init: bool) -> PyResult<Self> {
        let cfg = config("running", chained_init, None)?;
        mvtv_core::StreamSolver::new(candidates.0.clone(), cfg)
            .map(Self)
            .map_err(to_py)
    }

    fn push(&mut self, sample: Vec<f64>) -> PyResult<Vec<PySegment>> {
        let segs = self.0.push(&sample).map_err(to_py)?;
        Ok(segs.into_iter().map(PySegment::from).collect())
    }

    /// `(start, level)` of the open segment, or `None` before the first sample.
    fn provisional(&self) -> Option<(usize, Vec<f64>)> {
        self.0.provisional().map(|p| (p.start, p.level))
    }

    fn finish(&mut self) -> PyResult<Vec<PySegment>> {
        let segs = self.0.finish().map_err(to_py)?;
        Ok(segs.into_iter().map(PySegment::from).collect())
    }
}

/// Runs the streaming solver over a whole signal and returns
/// `(segments, reconstruction)`.
#[pyfunction]
#[pyo3(signature = (y, candidates, sigma="running", chained_init=false))]
fn run_stream(
    y: Vec<Vec<f64>>,
    candidates: &PyCandidateSet,
    sigma: &str,
    chained_init: bool,
) -> PyResult<(Vec<PySegment>, Vec<Vec<f64>>)> {
    let y = signal(y)?;
    let cfg = config(sigma, chained_init, Some(&y))?;
    let result = mvtv_core::run_stream(&y, &candidates.0, cfg).map_err(to_py)?;
    let x = result.reconstruct().map_err(to_py)?.to_samples();
    Ok((
        result.segments.into_iter().map(PySegment::from).collect(),
        x,
    ))
}

/// Exact univariate TV denoising.
#[pyfunction]
fn tv1d(y: Vec<f64>, lambda: f64) -> PyResult<Vec<f64>> {
    mvtv_core::tv1d_direct(&y, lambda).map_err(to_py)
}

/// Iterative reference solution of the grouped problem; returns `(x, u)`
/// with `u` given per difference.
#[pyfunction]
#[pyo3(signature = (y, lambda, rel_tol=1e-10))]
fn solve_exact(
    y: Vec<Vec<f64>>,
    lambda: f64,
    rel_tol: f64,
) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let y = signal(y)?;
    let sol = mvtv_core::solve_exact(&y, lambda, mvtv_core::ExactOptions::with_rel_tol(rel_tol))
        .map_err(to_py)?;
    Ok((sol.x.to_samples(), sol.u.to_samples()))
}

/// True when `(x, u)` satisfies the optimality conditions within `tol`.
#[pyfunction]
#[pyo3(signature = (x, y, u, lambda, tol=1e-8))]
fn verify_kkt(
    x: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    u: Vec<Vec<f64>>,
    lambda: f64,
    tol: f64,
) -> PyResult<bool> {
    let cert = DualCertificate::new(signal(u)?);
    let report = mvtv_core::verify_kkt(
        &signal(x)?,
        &signal(y)?,
        lambda,
        &cert,
        KktOptions::with_tol(tol),
    )
    .map_err(to_py)?;
    Ok(report.pass)
}

/// Random piecewise-constant signal plus noise at `snr_db`; returns `(clean, noisy)`.
#[pyfunction]
#[pyo3(signature = (m, n, snr_db, seed=0))]
fn generate(
    m: usize,
    n: usize,
    snr_db: f64,
    seed: u64,
) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let pc = eval::generate_piecewise(m, n, seed).map_err(to_py)?;
    let y = eval::add_noise(&pc.x, snr_db, seed.wrapping_add(1)).map_err(to_py)?;
    Ok((pc.x.to_samples(), y.to_samples()))
}

#[pyfunction]
fn mse(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> PyResult<f64> {
    eval::mse(&signal(a)?, &signal(b)?).map_err(to_py)
}

/// 0/1 indicator of nonzero differences.
#[pyfunction]
fn change_indicator(x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    Ok(eval::change_indicator(&signal(x)?))
}

#[pyfunction]
#[pyo3(signature = (a, b, smoothed=true))]
fn jaccard(a: Vec<f64>, b: Vec<f64>, smoothed: bool) -> PyResult<f64> {
    if smoothed {
        eval::smoothed_jaccard(&a, &b).map_err(to_py)
    } else {
        eval::jaccard(&a, &b).map_err(to_py)
    }
}

#[pymodule]
fn mvtv(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCandidateSet>()?;
    m.add_class::<PySegment>()?;
    m.add_class::<PyStreamSolver>()?;
    m.add_function(wrap_pyfunction!(run_stream, m)?)?;
    m.add_function(wrap_pyfunction!(tv1d, m)?)?;
    m.add_function(wrap_pyfunction!(solve_exact, m)?)?;
    m.add_function(wrap_pyfunction!(verify_kkt, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(mse, m)?)?;
    m.add_function(wrap_pyfunction!(change_indicator, m)?)?;
    m.add_function(wrap_pyfunction!(jaccard, m)?)?;
    Ok(())
}
