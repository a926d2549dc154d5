// SPDX-License-Identifier: MIT OR Apache-2.0

//! Online total-variation denoising of multivariate signals.
//!
//! The main entry points are [`StreamSolver`] / [`run_stream`] for the
//! streaming approximation, [`tv1d_direct`] for exact univariate denoising
//! and [`solve_exact`] for the iterative reference solver.

pub mod bench;
pub mod candidates;
pub mod error;
pub mod eval;
pub mod reference;
pub mod signal;
pub mod stream;
pub mod tv;
pub mod univariate;

pub use candidates::CandidateSet;
pub use error::{Result, TvError};
pub use reference::{solve_exact, solve_windowed, ExactOptions, ExactSolution, WindowedSolver};
pub use signal::Signal;
pub use stream::{
    run_stream, solve_known_z, CandidateState, Direction, Provisional, Segment, SegmentInit,
    SigmaMode, StreamConfig, StreamResult, StreamSolver,
};
pub use tv::{verify_kkt, DualCertificate, KktOptions, KktReport, TvParams};
pub use univariate::{tv1d_direct, tv1d_weighted};
