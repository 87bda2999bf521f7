//! LP-rounding polynomial-time approximation scheme for offline total
//! completion time.
//!
//! The scheme enumerates fixations that pin the jobs and test states of the
//! last few positions of the schedule, solves the relaxed assignment LP for
//! each, rounds the fractional solution (cycle elimination, then repeated
//! cutting of the one blocking cycle, then decrowding), and returns the best
//! schedule found. Positions are handled in reverse order throughout: the
//! job at reverse position `i` contributes `i` times its realized time.

mod path;
mod rounding;
mod solution;

pub use path::{build_cycle, build_second_cycle, select_cut_position, Path};
pub use rounding::{
    decrowd, eliminate_cycles, merge_shift, move_within_bound, repeated_cut, shift,
    ChargingTracker, JobMove, RepeatedCutResult,
};
pub use solution::{LpSolution, VarKey};

use std::collections::BTreeSet;
use std::sync::Mutex;

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::core::{
    rat_int, rational_to_string, CoreError, Instance, JobId, Rational, Schedule, TestState,
};
use crate::lp::{LinearProgram, LpError, LpOutcome, Relation};

#[derive(Debug, Error)]
pub enum PtasError {
    #[error("all lower processing times are required")]
    MissingLowerTimes,
    #[error("epsilon must be positive")]
    NonPositiveEpsilon,
    #[error("invalid fixation: {0}")]
    InvalidFixation(String),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("path has no inner positions to cut")]
    EmptyInnerPositions,
    #[error("shift out of range: {0}")]
    DeltaOutOfRange(String),
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),
    #[error("internal invariant violated: {0}")]
    InvariantViolation(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// A partial commitment: jobs that must be tested, variables pinned to one,
/// and positions temporarily allowed to hold up to two jobs.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Fixation {
    pub tested_jobs: BTreeSet<JobId>,
    pub fixed_vars: BTreeSet<VarKey>,
    pub crowded: BTreeSet<usize>,
}

impl Fixation {
    pub fn empty() -> Fixation {
        Fixation::default()
    }

    /// No pinned variable's job may carry a tested-job constraint.
    pub fn validate(&self) -> Result<(), PtasError> {
        for key in &self.fixed_vars {
            if self.tested_jobs.contains(&key.0) {
                return Err(PtasError::InvalidFixation(format!(
                    "job {} is both pinned and tested-constrained",
                    key.0
                )));
            }
        }
        Ok(())
    }

    pub fn with_crowded(&self, crowded: BTreeSet<usize>) -> Fixation {
        Fixation {
            tested_jobs: self.tested_jobs.clone(),
            fixed_vars: self.fixed_vars.clone(),
            crowded,
        }
    }
}

/// Builds the relaxed LP for an instance under a fixation: one variable per
/// (job, reverse position, state) with unit bounds, position rows (equal to
/// one, or at most two when crowded), job rows, the budget row, pins for the
/// fully-fixed variables, and a tested-row per tested job.
pub fn build_lp(instance: &Instance, fixation: &Fixation) -> Result<LinearProgram, PtasError> {
    if !instance.has_all_lower() {
        return Err(PtasError::MissingLowerTimes);
    }
    fixation.validate()?;
    let n = instance.n();
    let one = Rational::one();
    let mut lp = LinearProgram::new();
    for key in LpSolution::var_order(n) {
        let weight = LpSolution::weight(instance, key)?;
        let lower = if fixation.fixed_vars.contains(&key) {
            one.clone()
        } else {
            Rational::zero()
        };
        lp.add_var(weight, lower, Some(one.clone()));
    }
    let var_index = |key: VarKey| -> usize {
        let (j, i, t) = key;
        (j.0 * n + (i - 1)) * 2 + t as usize
    };
    for i in 1..=n {
        let coeffs: Vec<(usize, Rational)> = (0..n)
            .flat_map(|j| {
                [TestState::Untested, TestState::Tested]
                    .into_iter()
                    .map(move |t| (var_index((JobId(j), i, t)), Rational::one()))
            })
            .collect();
        if fixation.crowded.contains(&i) {
            lp.add_constraint(coeffs, Relation::Le, rat_int(2));
        } else {
            lp.add_constraint(coeffs, Relation::Eq, one.clone());
        }
    }
    for j in 0..n {
        let coeffs: Vec<(usize, Rational)> = (1..=n)
            .flat_map(|i| {
                [TestState::Untested, TestState::Tested]
                    .into_iter()
                    .map(move |t| (var_index((JobId(j), i, t)), Rational::one()))
            })
            .collect();
        lp.add_constraint(coeffs, Relation::Eq, one.clone());
    }
    let budget_row: Vec<(usize, Rational)> = (0..n)
        .flat_map(|j| {
            (1..=n).map(move |i| {
                (
                    var_index((JobId(j), i, TestState::Tested)),
                    instance.cost(JobId(j)).clone(),
                )
            })
        })
        .filter(|(_, c)| !c.is_zero())
        .collect();
    lp.add_constraint(budget_row, Relation::Le, instance.budget().clone());
    for &j in &fixation.tested_jobs {
        let coeffs: Vec<(usize, Rational)> = (1..=n)
            .map(|i| (var_index((j, i, TestState::Tested)), Rational::one()))
            .collect();
        lp.add_constraint(coeffs, Relation::Eq, one.clone());
    }
    Ok(lp)
}

/// How many trailing positions a fixation pins for accuracy `1/q`.
pub fn pinned_position_count(q: usize) -> usize {
    (2 * q + 1) * q
}

/// Enumerates the fixations the scheme tries: every assignment of distinct
/// jobs with test states to the pinned reverse positions. Each pin set
/// forces every larger unpinned job to be tested; assignments whose forced
/// tests already exceed the budget are filtered out.
pub fn enumerate_fixations(instance: &Instance, q: usize) -> Result<Vec<Fixation>, PtasError> {
    if !instance.has_all_lower() {
        return Err(PtasError::MissingLowerTimes);
    }
    let n = instance.n();
    let m = pinned_position_count(q).min(n);
    let mut out = Vec::new();
    let mut pins: Vec<(JobId, TestState)> = Vec::with_capacity(m);
    let mut used = vec![false; n];
    enumerate_pins(instance, m, &mut pins, &mut used, &mut out)?;
    Ok(out)
}

fn enumerate_pins(
    instance: &Instance,
    m: usize,
    pins: &mut Vec<(JobId, TestState)>,
    used: &mut Vec<bool>,
    out: &mut Vec<Fixation>,
) -> Result<(), PtasError> {
    if pins.len() == m {
        if let Some(fixation) = fixation_from_pins(instance, pins)? {
            out.push(fixation);
        }
        return Ok(());
    }
    for j in 0..instance.n() {
        if used[j] {
            continue;
        }
        for state in [TestState::Untested, TestState::Tested] {
            used[j] = true;
            pins.push((JobId(j), state));
            enumerate_pins(instance, m, pins, used, out)?;
            pins.pop();
            used[j] = false;
        }
    }
    Ok(())
}

/// Builds the fixation for one pin assignment, or `None` when it is plainly
/// infeasible. The pinned realized times determine which unpinned jobs must
/// be tested: any job whose upper time exceeds the smallest pinned realized
/// time cannot run untested behind the pins.
fn fixation_from_pins(
    instance: &Instance,
    pins: &[(JobId, TestState)],
) -> Result<Option<Fixation>, PtasError> {
    let mut fixed_vars = BTreeSet::new();
    let mut min_realized: Option<Rational> = None;
    let mut pinned_jobs = BTreeSet::new();
    let mut pinned_tested_cost = Rational::zero();
    for (slot, &(j, state)) in pins.iter().enumerate() {
        fixed_vars.insert((j, slot + 1, state));
        pinned_jobs.insert(j);
        let realized = instance.realized(j, state)?;
        if state == TestState::Tested {
            pinned_tested_cost += instance.cost(j);
        }
        if min_realized.as_ref().is_none_or(|m| &realized < m) {
            min_realized = Some(realized);
        }
    }
    let tested_jobs: BTreeSet<JobId> = match &min_realized {
        None => BTreeSet::new(),
        Some(min) => instance
            .jobs()
            .filter(|j| !pinned_jobs.contains(j) && instance.p_up(*j) > min)
            .collect(),
    };
    let mut forced_cost = pinned_tested_cost;
    for &j in &tested_jobs {
        forced_cost += instance.cost(j);
    }
    if &forced_cost > instance.budget() {
        return Ok(None);
    }
    let fixation = Fixation {
        tested_jobs,
        fixed_vars,
        crowded: BTreeSet::new(),
    };
    fixation.validate()?;
    Ok(Some(fixation))
}

/// Per-phase trace events emitted by [`ptas_solve_traced`].
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    FixationStart {
        index: usize,
        pins: Vec<(usize, usize, TestState)>,
        forced_tested: Vec<usize>,
    },
    FixationPruned {
        index: usize,
        lower_bound: String,
    },
    LpInfeasible {
        index: usize,
    },
    LpSolved {
        index: usize,
        value: String,
        fractional_vars: usize,
        /// Nonzero assignments as (job, reverse position, state, value).
        nonzero: Vec<(usize, usize, TestState, String)>,
    },
    BlockingCycle {
        index: usize,
        positions: Vec<usize>,
    },
    RoundingDone {
        index: usize,
        crowded: Vec<usize>,
        ejected: Option<usize>,
    },
    FixationResult {
        index: usize,
        value: String,
    },
    Solved {
        value: String,
        fixation_index: usize,
    },
}

/// Result of one fixation run, tagged with the enumeration index for the
/// deterministic cross-fixation tie-break.
struct FixationOutcome {
    index: usize,
    value: Rational,
    schedule: Schedule,
}

/// The approximation scheme. `epsilon` is rounded down to the nearest
/// reciprocal of a positive integer `1/q`; the value of the returned
/// schedule is within the scheme's guarantee factor
/// `(M+1)/M * ((1 + 1/q) + 2/M)` of optimal, where `M = (2q+1)q` positions
/// are pinned per fixation.
pub fn ptas_solve(
    instance: &Instance,
    epsilon: &Rational,
) -> Result<(Schedule, Rational), PtasError> {
    solve_impl(instance, epsilon, None)
}

/// As [`ptas_solve`], forwarding per-phase events to `sink`. Tracing runs
/// the fixations sequentially.
pub fn ptas_solve_traced(
    instance: &Instance,
    epsilon: &Rational,
    sink: &mut dyn FnMut(TraceEvent),
) -> Result<(Schedule, Rational), PtasError> {
    solve_impl(instance, epsilon, Some(sink))
}

/// Accuracy step: the largest reciprocal integer `1/q` not above epsilon.
pub fn accuracy_steps(epsilon: &Rational) -> Result<usize, PtasError> {
    use num_traits::ToPrimitive;
    if !epsilon.is_positive() {
        return Err(PtasError::NonPositiveEpsilon);
    }
    epsilon
        .recip()
        .ceil()
        .to_integer()
        .to_usize()
        .filter(|&q| q >= 1)
        .ok_or(PtasError::NonPositiveEpsilon)
}

fn solve_impl(
    instance: &Instance,
    epsilon: &Rational,
    mut sink: Option<&mut dyn FnMut(TraceEvent)>,
) -> Result<(Schedule, Rational), PtasError> {
    if !instance.has_all_lower() {
        return Err(PtasError::MissingLowerTimes);
    }
    let q = accuracy_steps(epsilon)?;
    let fixations = enumerate_fixations(instance, q)?;
    let best: Mutex<Option<FixationOutcome>> = Mutex::new(None);

    let run_one = |index: usize,
                   fixation: &Fixation,
                   sink: &mut Option<&mut dyn FnMut(TraceEvent)>|
     -> Result<(), PtasError> {
        if let Some(sink) = sink.as_mut() {
            sink(TraceEvent::FixationStart {
                index,
                pins: fixation
                    .fixed_vars
                    .iter()
                    .map(|&(j, i, t)| (i, j.one_based(), t))
                    .collect(),
                forced_tested: fixation.tested_jobs.iter().map(|j| j.one_based()).collect(),
            });
        }
        let bound = fixation_lower_bound(instance, fixation)?;
        {
            let guard = best.lock().unwrap();
            if let Some(cur) = guard.as_ref() {
                if bound > cur.value {
                    drop(guard);
                    if let Some(sink) = sink.as_mut() {
                        sink(TraceEvent::FixationPruned {
                            index,
                            lower_bound: rational_to_string(&bound),
                        });
                    }
                    return Ok(());
                }
            }
        }
        let Some(outcome) = run_fixation(instance, fixation, q, index, sink)? else {
            return Ok(());
        };
        let mut guard = best.lock().unwrap();
        let better = match guard.as_ref() {
            None => true,
            Some(cur) => {
                outcome.value < cur.value || (outcome.value == cur.value && outcome.index < cur.index)
            }
        };
        if better {
            *guard = Some(outcome);
        }
        Ok(())
    };

    if sink.is_some() {
        for (index, fixation) in fixations.iter().enumerate() {
            run_one(index, fixation, &mut sink)?;
        }
    } else {
        fixations
            .par_iter()
            .enumerate()
            .try_for_each(|(index, fixation)| {
                let mut no_sink: Option<&mut dyn FnMut(TraceEvent)> = None;
                run_one(index, fixation, &mut no_sink)
            })?;
    }

    let outcome = best
        .into_inner()
        .unwrap()
        .ok_or_else(|| PtasError::InvariantViolation("no fixation produced a schedule".into()))?;
    if let Some(sink) = sink.as_mut() {
        sink(TraceEvent::Solved {
            value: rational_to_string(&outcome.value),
            fixation_index: outcome.index,
        });
    }
    Ok((outcome.schedule, outcome.value))
}

/// Cheap lower bound on any schedule consistent with a fixation's pins: the
/// pinned contributions plus the cheapest conceivable placement of the
/// remaining jobs (their minimum realized times, largest time at the
/// smallest open position).
fn fixation_lower_bound(instance: &Instance, fixation: &Fixation) -> Result<Rational, PtasError> {
    let n = instance.n();
    let mut pinned_jobs = BTreeSet::new();
    let mut total = Rational::zero();
    let mut m = 0;
    for &(j, i, t) in &fixation.fixed_vars {
        total += LpSolution::weight(instance, (j, i, t))?;
        pinned_jobs.insert(j);
        m = m.max(i);
    }
    let mut rest: Vec<Rational> = instance
        .jobs()
        .filter(|j| !pinned_jobs.contains(j))
        .map(|j| {
            let low = instance.p_low(j).expect("lower times checked").clone();
            if instance.cost(j) <= instance.budget() {
                low
            } else {
                instance.p_up(j).clone()
            }
        })
        .collect();
    rest.sort_by(|a, b| b.cmp(a));
    for (offset, p) in rest.into_iter().enumerate() {
        debug_assert!(m + 1 + offset <= n);
        total += rat_int((m + 1 + offset) as i64) * p;
    }
    Ok(total)
}

fn run_fixation(
    instance: &Instance,
    fixation: &Fixation,
    q: usize,
    index: usize,
    sink: &mut Option<&mut dyn FnMut(TraceEvent)>,
) -> Result<Option<FixationOutcome>, PtasError> {
    let lp = build_lp(instance, fixation)?;
    let outcome = crate::lp::solve_min(&lp)?;
    let values = match outcome {
        LpOutcome::Infeasible => {
            if let Some(sink) = sink.as_mut() {
                sink(TraceEvent::LpInfeasible { index });
            }
            return Ok(None);
        }
        LpOutcome::Unbounded => {
            return Err(PtasError::InvariantViolation(
                "assignment LP cannot be unbounded".into(),
            ))
        }
        LpOutcome::Optimal { values, .. } => values,
    };
    let x = LpSolution::from_values(instance, values)?;
    x.check_valid(instance, fixation)?;
    if let Some(sink) = sink.as_mut() {
        let nonzero = LpSolution::var_order(instance.n())
            .filter(|&key| !x.get(key).is_zero())
            .map(|(j, i, t)| (j.one_based(), i, t, rational_to_string(x.get((j, i, t)))))
            .collect();
        sink(TraceEvent::LpSolved {
            index,
            value: rational_to_string(x.cost()),
            fractional_vars: x.fractional_vars().len(),
            nonzero,
        });
    }

    let (x, blocking) = eliminate_cycles(x, instance, fixation)?;
    let (x, crowded, ejected) = match blocking {
        None => (x, BTreeSet::new(), None),
        Some(cycle) => {
            if let Some(sink) = sink.as_mut() {
                sink(TraceEvent::BlockingCycle {
                    index,
                    positions: cycle.position_sequence(),
                });
            }
            let result = repeated_cut(x, cycle, q, instance, fixation)?;
            (result.solution, result.crowded, result.ejected)
        }
    };
    if let Some(sink) = sink.as_mut() {
        sink(TraceEvent::RoundingDone {
            index,
            crowded: crowded.iter().copied().collect(),
            ejected: ejected.map(|j| j.one_based()),
        });
    }

    // Remove an ejected job before decrowding; it is reinserted untested at
    // reverse position M+1 afterwards, shifting intermediate jobs up.
    let mut x = x;
    if let Some(job) = ejected {
        let occupied = LpSolution::var_order(instance.n())
            .find(|&key| key.0 == job && !x.get(key).is_zero())
            .ok_or_else(|| {
                PtasError::InvariantViolation("ejected job has no scheduled variable".into())
            })?;
        x.set(instance, occupied, Rational::zero())?;
    }
    let (mut x, moves) = decrowd(&x, instance, &crowded)?;
    for mv in &moves {
        if !move_within_bound(mv, q) {
            return Err(PtasError::InvariantViolation(format!(
                "decrowding moved {} from {} to {}, beyond the (q+1)/q factor",
                mv.job, mv.from, mv.to
            )));
        }
    }
    if let Some(job) = ejected {
        insert_at(&mut x, instance, job, pinned_position_count(q) + 1)?;
    }

    let schedule = x.to_schedule(instance)?;
    let value = crate::core::total_completion_time(instance, &schedule)?;
    if &value != x.cost() {
        return Err(PtasError::InvariantViolation(
            "schedule value differs from solution cost".into(),
        ));
    }
    if let Some(sink) = sink.as_mut() {
        sink(TraceEvent::FixationResult {
            index,
            value: rational_to_string(&value),
        });
    }
    Ok(Some(FixationOutcome {
        index,
        value,
        schedule,
    }))
}

/// Inserts a job untested at the given reverse position, shifting the jobs
/// between it and the next empty position one position up.
fn insert_at(
    x: &mut LpSolution,
    instance: &Instance,
    job: JobId,
    position: usize,
) -> Result<(), PtasError> {
    let n = x.n();
    if position > n {
        return Err(PtasError::InvariantViolation(format!(
            "insertion position {position} exceeds {n}"
        )));
    }
    let occ = x.occupancy()?;
    let empty = (position..=n).find(|&i| occ[i].is_empty()).ok_or_else(|| {
        PtasError::InvariantViolation("no empty position at or above the insertion point".into())
    })?;
    for i in (position..empty).rev() {
        for &(j, t) in &occ[i] {
            x.set(instance, (j, i, t), Rational::zero())?;
            x.set(instance, (j, i + 1, t), rat_int(1))?;
        }
    }
    x.set(instance, (job, position, TestState::Untested), rat_int(1))?;
    Ok(())
}
