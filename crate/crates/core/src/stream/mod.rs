// SPDX-License-Identifier: MIT OR Apache-2.0

//! On-the-fly approximate solver for the grouped TV problem.

pub mod bounds;
pub mod engine;
pub mod known_z;
pub mod select;

pub use bounds::{CandidateState, Direction, Finalized, Revision, Status, Step};
pub use engine::{
    run_stream, Segment, SegmentInit, SigmaMode, StreamConfig, StreamResult, StreamSolver,
};
pub use known_z::solve_known_z;
pub use select::{
    normalized_gap, provisional_estimate, select_candidate, select_scored, Provisional,
    RunningScale, SelectionEntry,
};
