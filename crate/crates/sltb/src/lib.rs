//! Solvers for scheduling with a limited testing budget (SLTB) on a single
//! machine.
//!
//! Each job has an upper processing time that drops to a lower processing
//! time when the job is tested, and testing a job consumes a job-specific
//! amount of a shared budget. The crate covers both objectives (total
//! completion time and makespan) and both information models:
//!
//! * offline solvers: a brute-force oracle, knapsack-style dynamic programs
//!   and FPTASes, and an LP-rounding PTAS for total completion time,
//! * the oblivious setting, where lower processing times are hidden:
//!   auxiliary-instance strategies, worst-case adversaries and a
//!   competitive-ratio simulator,
//! * hardness-reduction instance generators (Partition, knapsack) with
//!   oracle-backed verifiers.
//!
//! All model arithmetic is exact (`BigRational`); floating point appears only
//! in human-readable reporting.

// Error variants carry the exact rationals they report; boxing them is not
// worth the ergonomics at desk scale.
#![allow(clippy::result_large_err)]

pub mod core;
pub mod generator;
pub mod lp;
pub mod makespan;
pub mod oblivious;
pub mod oracle;
pub mod ptas;
pub mod reductions;
pub mod tct_dp;

pub use crate::core::{Instance, JobId, Objective, Rational, Schedule, TestState};
