//! The rounding pipeline: shift operations along paths, cycle elimination,
//! the repeated-cut rounding of a blocking cycle, and the decrowding pass
//! that turns a solution with doubly-occupied positions into a schedule.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{Signed, Zero};

use crate::core::{rat_int, Instance, JobId, Rational, TestState};

use super::path::{build_cycle, build_second_cycle, select_cut_position, Path};
use super::solution::{LpSolution, VarKey};
use super::{Fixation, PtasError};

/// Shifts a path by `delta`: odd edges decrease, even edges increase, so a
/// `y`-alternating path becomes `(y - delta)`-alternating. The caller
/// guarantees the results stay in `[0, 1]`. Under this direction the budget
/// use changes by exactly `+delta * budget_rate` (with the rate defined as
/// exit-minus-entry), which is asserted on every call.
pub fn shift(
    x: &LpSolution,
    path: &Path,
    delta: &Rational,
    instance: &Instance,
) -> Result<LpSolution, PtasError> {
    let mut out = x.clone();
    let alternating_before = path.alternating_value(x);
    for (k, &edge) in path.edges().iter().enumerate() {
        let v = if Path::is_odd(k) {
            x.get(edge) - delta
        } else {
            x.get(edge) + delta
        };
        if v.is_negative() || v > rat_int(1) {
            return Err(PtasError::DeltaOutOfRange(format!(
                "edge {edge:?} would take value {v}"
            )));
        }
        out.set(instance, edge, v)?;
    }
    let expected = x.budget_use() + delta * path.budget_rate(instance);
    if out.budget_use() != &expected || out.recompute_budget_use(instance) != expected {
        return Err(PtasError::InvariantViolation(
            "shift broke the budget identity".into(),
        ));
    }
    if let Some(y) = alternating_before {
        debug_assert_eq!(path.alternating_value(&out), Some(y - delta));
    }
    Ok(out)
}

/// Largest admissible magnitude for moving each variable at linear rate
/// `rate[key] * delta` while staying inside `[0, 1]`, given the sign of
/// `delta`.
fn max_step(
    x: &LpSolution,
    rates: &BTreeMap<VarKey, Rational>,
    positive: bool,
) -> Option<Rational> {
    let mut best: Option<Rational> = None;
    for (key, rate) in rates {
        if rate.is_zero() {
            continue;
        }
        let v = x.get(*key);
        let grows = rate.is_positive() == positive;
        let room = if grows { rat_int(1) - v } else { v.clone() };
        let limit = room / rate.abs();
        if best.as_ref().is_none_or(|b| &limit < b) {
            best = Some(limit);
        }
    }
    best
}

/// Net per-variable rates of a joint shift: path 1 moves at `scale1` per
/// unit of delta, path 2 at `scale2`.
fn joint_rates(
    p1: &Path,
    scale1: &Rational,
    p2: Option<(&Path, &Rational)>,
) -> BTreeMap<VarKey, Rational> {
    let mut rates: BTreeMap<VarKey, Rational> = BTreeMap::new();
    let mut add = |path: &Path, scale: &Rational| {
        for (k, &edge) in path.edges().iter().enumerate() {
            let r = if Path::is_odd(k) {
                -scale.clone()
            } else {
                scale.clone()
            };
            *rates.entry(edge).or_insert_with(Rational::zero) += r;
        }
    };
    add(p1, scale1);
    if let Some((p2, scale2)) = p2 {
        add(p2, scale2);
    }
    rates
}

/// Rounds along one or two fractional paths. A single path must have budget
/// rate zero; a pair must have nonzero rates and differing variable sets,
/// and is shifted at rates that cancel each other's budget change. The sign
/// is chosen so the cost does not increase (ties toward positive) and the
/// magnitude is the largest keeping every variable in `[0, 1]`, which makes
/// at least one more variable integral.
///
/// Returns the new solution and the start/end positions of the non-cyclic
/// paths involved, which the caller adds to the crowded set.
pub fn merge_shift(
    x: &LpSolution,
    p1: &Path,
    p2: Option<&Path>,
    instance: &Instance,
) -> Result<(LpSolution, BTreeSet<usize>), PtasError> {
    if !p1.is_fractional(x) {
        return Err(PtasError::PreconditionViolation(
            "first path is not fractional".into(),
        ));
    }
    let rate1 = p1.budget_rate(instance);
    let rates = match p2 {
        None => {
            if !rate1.is_zero() {
                return Err(PtasError::PreconditionViolation(format!(
                    "single path must have budget rate zero, got {rate1}"
                )));
            }
            joint_rates(p1, &rat_int(1), None)
        }
        Some(p2) => {
            if !p2.is_fractional(x) {
                return Err(PtasError::PreconditionViolation(
                    "second path is not fractional".into(),
                ));
            }
            let rate2 = p2.budget_rate(instance);
            if rate1.is_zero() || rate2.is_zero() {
                return Err(PtasError::PreconditionViolation(
                    "paired paths need nonzero budget rates".into(),
                ));
            }
            if p1.var_set() == p2.var_set() {
                // The rounding theory cannot make progress here; report
                // rather than guess.
                return Err(PtasError::PreconditionViolation(
                    "paired paths share their entire variable set".into(),
                ));
            }
            // Path 1 moves by delta * rate2, path 2 by -delta * rate1: the
            // budget changes cancel exactly.
            joint_rates(p1, &rate2, Some((p2, &(-rate1.clone()))))
        }
    };

    // Cost derivative per unit delta decides the sign.
    let mut cost_rate = Rational::zero();
    for (key, rate) in &rates {
        if !rate.is_zero() {
            cost_rate += LpSolution::weight(instance, *key)? * rate;
        }
    }
    let positive = !cost_rate.is_positive();
    let magnitude = max_step(x, &rates, positive).ok_or_else(|| {
        PtasError::InvariantViolation("joint shift moves no variable".into())
    })?;
    if !magnitude.is_positive() {
        return Err(PtasError::InvariantViolation(
            "joint shift is blocked at zero step".into(),
        ));
    }
    let delta = if positive {
        magnitude
    } else {
        -magnitude
    };

    let mut out = x.clone();
    for (key, rate) in &rates {
        if rate.is_zero() {
            continue;
        }
        let v = x.get(*key) + rate * &delta;
        debug_assert!(!v.is_negative() && v <= rat_int(1));
        out.set(instance, *key, v)?;
    }

    let fewer_fractional = out.fractional_vars().len() < x.fractional_vars().len();
    if !fewer_fractional {
        return Err(PtasError::InvariantViolation(
            "joint shift did not round any variable".into(),
        ));
    }
    if out.budget_use() != x.budget_use() {
        return Err(PtasError::InvariantViolation(
            "joint shift changed the budget use".into(),
        ));
    }
    if out.cost() > x.cost() {
        return Err(PtasError::InvariantViolation(
            "joint shift increased the cost".into(),
        ));
    }

    let mut newly_crowded = BTreeSet::new();
    for path in std::iter::once(p1).chain(p2) {
        if !path.is_cycle() {
            newly_crowded.insert(path.start_position());
            newly_crowded.insert(path.end_position());
        }
    }
    Ok((out, newly_crowded))
}

/// Rounds fractional cycles until the solution is integral or exactly one
/// critical cycle with nonzero budget rate remains; that blocking cycle is
/// returned and is alternating. Cycle shifts never touch position loads, so
/// no crowded positions are created.
pub fn eliminate_cycles(
    x: LpSolution,
    instance: &Instance,
    fixation: &Fixation,
) -> Result<(LpSolution, Option<Path>), PtasError> {
    if !fixation.crowded.is_empty() {
        return Err(PtasError::PreconditionViolation(
            "cycle elimination expects no crowded positions".into(),
        ));
    }
    let mut x = x;
    loop {
        let fractional = x.fractional_vars();
        if fractional.is_empty() {
            return Ok((x, None));
        }
        let first = build_cycle(&x, fractional[0], None)?;
        if first.budget_rate(instance).is_zero() {
            let (next, crowded) = merge_shift(&x, &first, None, instance)?;
            debug_assert!(crowded.is_empty());
            x = next;
            continue;
        }
        if first.var_set() == fractional.iter().copied().collect() {
            // Critical cycle with nonzero rate: blocking. It must be
            // alternating.
            if first.alternating_value(&x).is_none() {
                return Err(PtasError::InvariantViolation(
                    "blocking cycle is not alternating".into(),
                ));
            }
            return Ok((x, Some(first)));
        }
        let second = build_second_cycle(&x, &first)?;
        if second.budget_rate(instance).is_zero() {
            let (next, crowded) = merge_shift(&x, &second, None, instance)?;
            debug_assert!(crowded.is_empty());
            x = next;
            continue;
        }
        let (next, crowded) = merge_shift(&x, &first, Some(&second), instance)?;
        debug_assert!(crowded.is_empty());
        x = next;
    }
}

/// Outcome of the repeated-cut rounding.
pub struct RepeatedCutResult {
    pub solution: LpSolution,
    /// Final crowded positions: the cycle's start/end plus every cut.
    pub crowded: BTreeSet<usize>,
    /// A job rescheduled in the no-inner-positions branch whose types
    /// differed; the assembly reinserts it near the end of the schedule.
    pub ejected: Option<JobId>,
}

/// Repeatedly cuts a blocking cycle into two paths at selected positions and
/// rounds them with paired shifts, relaxing the cut positions to crowded.
/// Maintains the loop invariant: the current solution is valid for the
/// fixation with the accumulated crowded set, and the current path is
/// critical, fractional and alternating with endpoints in that set.
pub fn repeated_cut(
    x: LpSolution,
    cycle: Path,
    q: usize,
    instance: &Instance,
    fixation: &Fixation,
) -> Result<RepeatedCutResult, PtasError> {
    if !fixation.crowded.is_empty() {
        return Err(PtasError::PreconditionViolation(
            "repeated cut expects a fixation without crowded positions".into(),
        ));
    }
    if !cycle.is_cycle() {
        return Err(PtasError::PreconditionViolation(
            "repeated cut needs a cycle".into(),
        ));
    }
    let mut x = x;
    let mut path = cycle;
    let mut crowded: BTreeSet<usize> = BTreeSet::new();
    crowded.insert(path.start_position());
    let mut tracker = ChargingTracker::init(q, &path, &crowded);

    loop {
        check_loop_invariant(&x, &path, &crowded, instance, fixation)?;
        if path.budget_rate(instance).is_zero() {
            // Unreachable from a blocking cycle (cut remainders keep their
            // nonzero rate), but Algorithm 1 closes this case with a single
            // zero-rate shift.
            let (next, _) = merge_shift(&x, &path, None, instance)?;
            x = next;
            finish_tracker(&mut tracker, &crowded)?;
            return Ok(RepeatedCutResult {
                solution: x,
                crowded,
                ejected: None,
            });
        }
        if path.inner_positions().is_empty() {
            // One job left on the path between two crowded positions.
            let (entry, exit) = {
                let edges = path.edges();
                (edges[0], edges[1])
            };
            let job = entry.0;
            let target = entry.1.min(exit.1);
            let state = if entry.2 == TestState::Tested && exit.2 == TestState::Tested {
                TestState::Tested
            } else {
                TestState::Untested
            };
            x.set(instance, entry, Rational::zero())?;
            x.set(instance, exit, Rational::zero())?;
            x.set(instance, (job, target, state), rat_int(1))?;
            let ejected = if entry.2 != exit.2 {
                if fixation.tested_jobs.contains(&job) {
                    return Err(PtasError::InvariantViolation(format!(
                        "tested job {job} reached the reschedule branch with mixed types"
                    )));
                }
                Some(job)
            } else {
                None
            };
            finish_tracker(&mut tracker, &crowded)?;
            return Ok(RepeatedCutResult {
                solution: x,
                crowded,
                ejected,
            });
        }

        let cut_at = select_cut_position(&path, q)?;
        let (first, second) = path.cut(cut_at)?;
        crowded.insert(cut_at);

        let rate1 = first.budget_rate(instance);
        let rate2 = second.budget_rate(instance);
        let (next, _) = if rate1.is_zero() {
            merge_shift(&x, &first, None, instance)?
        } else if rate2.is_zero() {
            merge_shift(&x, &second, None, instance)?
        } else {
            merge_shift(&x, &first, Some(&second), instance)?
        };
        x = next;

        let first_integral = !first.is_fractional(&x);
        let second_integral = !second.is_fractional(&x);
        if first_integral && second_integral {
            finish_tracker(&mut tracker, &crowded)?;
            return Ok(RepeatedCutResult {
                solution: x,
                crowded,
                ejected: None,
            });
        }
        if let Some(tracker) = tracker.as_mut() {
            let integral_half = if first_integral { &first } else { &second };
            let remaining_half = if first_integral { &second } else { &first };
            tracker.on_cut(cut_at, integral_half, remaining_half, &crowded)?;
        }
        path = if first_integral { second } else { first };
    }
}

fn check_loop_invariant(
    x: &LpSolution,
    path: &Path,
    crowded: &BTreeSet<usize>,
    instance: &Instance,
    fixation: &Fixation,
) -> Result<(), PtasError> {
    let relaxed = fixation.with_crowded(crowded.clone());
    x.check_valid(instance, &relaxed)?;
    if !path.is_fractional(x) {
        return Err(PtasError::InvariantViolation(
            "current path is not fractional".into(),
        ));
    }
    if path.alternating_value(x).is_none() {
        return Err(PtasError::InvariantViolation(
            "current path is not alternating".into(),
        ));
    }
    let fractional: BTreeSet<VarKey> = x.fractional_vars().into_iter().collect();
    if path.var_set() != fractional {
        return Err(PtasError::InvariantViolation(
            "current path is not critical".into(),
        ));
    }
    if !crowded.contains(&path.start_position()) || !crowded.contains(&path.end_position()) {
        return Err(PtasError::InvariantViolation(
            "path endpoints escaped the crowded set".into(),
        ));
    }
    Ok(())
}

fn finish_tracker(
    tracker: &mut Option<ChargingTracker>,
    crowded: &BTreeSet<usize>,
) -> Result<(), PtasError> {
    if let Some(t) = tracker.as_mut() {
        t.finish(crowded)?;
    }
    Ok(())
}

/// Debug bookkeeping for the decrowding cost argument: every tracked
/// position owns `q` distinct smaller positions outside the tracked set.
/// Maintained only in debug builds; failures are reported, never ignored.
pub struct ChargingTracker {
    q: usize,
    mu: BTreeMap<usize, BTreeSet<usize>>,
}

impl ChargingTracker {
    /// Builds the initial charging function for the cycle's crowded start
    /// plus the smallest `2q + 1` inner positions, greedily assigning each
    /// tracked position the smallest free smaller positions. Enabled in
    /// debug builds only.
    pub fn init(q: usize, path: &Path, crowded: &BTreeSet<usize>) -> Option<ChargingTracker> {
        if !cfg!(debug_assertions) {
            return None;
        }
        let mut tracked: BTreeSet<usize> = crowded.clone();
        let mut inner = path.inner_positions();
        inner.sort_unstable();
        tracked.extend(inner.iter().take(2 * q + 1).copied());

        let mut mu = BTreeMap::new();
        let mut used: BTreeSet<usize> = BTreeSet::new();
        for &member in &tracked {
            let mut images = BTreeSet::new();
            for candidate in 1..member {
                if tracked.contains(&candidate) || used.contains(&candidate) {
                    continue;
                }
                images.insert(candidate);
                if images.len() == q {
                    break;
                }
            }
            if images.len() < q {
                // Not enough smaller free positions; charging is impossible
                // for arbitrary fixations, so the tracker stays disabled.
                return None;
            }
            used.extend(images.iter().copied());
            mu.insert(member, images);
        }
        Some(ChargingTracker { q, mu })
    }

    fn tracked(&self) -> BTreeSet<usize> {
        self.mu.keys().copied().collect()
    }

    /// Updates the charging function after a cut: positions lost to the
    /// integral half release their images to the new members of the window
    /// on the remaining half.
    pub fn on_cut(
        &mut self,
        _selected: usize,
        integral_half: &Path,
        remaining_half: &Path,
        crowded: &BTreeSet<usize>,
    ) -> Result<(), PtasError> {
        let mut target: BTreeSet<usize> = crowded.clone();
        let mut window = remaining_half.inner_positions();
        window.sort_unstable();
        target.extend(window.iter().take(2 * self.q + 1).copied());

        let old = self.tracked();
        let removed: Vec<usize> = old.difference(&target).copied().collect();
        let added: Vec<usize> = target.difference(&old).copied().collect();
        let integral_inner: BTreeSet<usize> = integral_half.inner_positions().into_iter().collect();
        for r in &removed {
            if !integral_inner.contains(r) {
                return Err(PtasError::InvariantViolation(format!(
                    "tracked position {r} left the charging set but not via the integral half"
                )));
            }
        }
        if added.len() > removed.len() + 1 {
            return Err(PtasError::InvariantViolation(format!(
                "charging update gains {} members but frees only {}",
                added.len(),
                removed.len()
            )));
        }

        // Transfer images from removed members to new ones; the one extra
        // new member (if any) is charged to the removed positions
        // themselves, which are now free and smaller.
        let mut freed: Vec<BTreeSet<usize>> = Vec::new();
        for r in &removed {
            freed.push(self.mu.remove(r).expect("tracked member has an image"));
        }
        let mut extra: Option<usize> = None;
        for (idx, &a) in added.iter().enumerate() {
            if idx < freed.len() {
                let images = freed[idx].clone();
                if images.iter().any(|&i| i >= a) {
                    return Err(PtasError::InvariantViolation(format!(
                        "inherited image of {a} is not smaller"
                    )));
                }
                self.mu.insert(a, images);
            } else {
                extra = Some(a);
            }
        }
        if let Some(a) = extra {
            let images: BTreeSet<usize> = removed.iter().copied().collect();
            if images.len() != self.q || images.iter().any(|&i| i >= a) {
                return Err(PtasError::InvariantViolation(format!(
                    "released positions cannot charge the new member {a}"
                )));
            }
            self.mu.insert(a, images);
        }
        self.verify()
    }

    /// Final restriction to the crowded set once the path is consumed.
    pub fn finish(&mut self, crowded: &BTreeSet<usize>) -> Result<(), PtasError> {
        self.mu.retain(|k, _| crowded.contains(k));
        for c in crowded {
            if !self.mu.contains_key(c) {
                return Err(PtasError::InvariantViolation(format!(
                    "crowded position {c} was never charged"
                )));
            }
        }
        self.verify()
    }

    /// Well-formedness: image sizes, strict smallness, pairwise disjointness
    /// and disjointness from the tracked set.
    pub fn verify(&self) -> Result<(), PtasError> {
        let tracked = self.tracked();
        let mut seen: BTreeSet<usize> = BTreeSet::new();
        for (&member, images) in &self.mu {
            if images.len() != self.q {
                return Err(PtasError::InvariantViolation(format!(
                    "position {member} charges {} positions, expected {}",
                    images.len(),
                    self.q
                )));
            }
            for &i in images {
                if i >= member {
                    return Err(PtasError::InvariantViolation(format!(
                        "position {member} charges a non-smaller position {i}"
                    )));
                }
                if tracked.contains(&i) {
                    return Err(PtasError::InvariantViolation(format!(
                        "image {i} lies inside the charging set"
                    )));
                }
                if !seen.insert(i) {
                    return Err(PtasError::InvariantViolation(format!(
                        "image {i} charged twice"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A job move performed by decrowding, for the cost-ratio assertions.
#[derive(Clone, Copy, Debug)]
pub struct JobMove {
    pub job: JobId,
    pub from: usize,
    pub to: usize,
}

/// Resolves doubly-occupied positions by an ascending scan: at a double,
/// jobs between it and the next empty position move one up and one of the
/// two jobs follows. When all empties lie below the double, the larger job
/// moves down into the closest one instead, which only shrinks its
/// contribution. At a double the job with the smaller realized time stays.
///
/// Returns the moves performed; when the crowded set admits a charging
/// function the caller can assert [`move_within_bound`] on each.
pub fn decrowd(
    x: &LpSolution,
    instance: &Instance,
    crowded: &BTreeSet<usize>,
) -> Result<(LpSolution, Vec<JobMove>), PtasError> {
    let n = x.n();
    let mut occ = x.occupancy()?;
    for (i, slot) in occ.iter().enumerate().skip(1) {
        let len = slot.len();
        let ok = if crowded.contains(&i) { len <= 2 } else { len == 1 };
        if !ok {
            return Err(PtasError::PreconditionViolation(format!(
                "position {i} schedules {len} jobs"
            )));
        }
    }
    let original: BTreeMap<JobId, usize> = occ
        .iter()
        .enumerate()
        .flat_map(|(i, slot)| slot.iter().map(move |(j, _)| (*j, i)))
        .collect();

    let mut i = 1;
    while i <= n {
        if occ[i].len() < 2 {
            i += 1;
            continue;
        }
        // Deterministic split: smaller realized time stays.
        occ[i].sort_by_key(|&(j, t)| {
            (
                instance.realized(j, t).expect("states were evaluated before"),
                j,
            )
        });
        if let Some(empty) = (i + 1..=n).find(|&p| occ[p].is_empty()) {
            // Shift the block one position up, then move the larger job up.
            for p in (i + 1..empty).rev() {
                let block = std::mem::take(&mut occ[p]);
                occ[p + 1] = block;
            }
            let mover = occ[i].pop().expect("double has two jobs");
            occ[i + 1] = vec![mover];
        } else {
            let empty = (1..i)
                .rev()
                .find(|&p| occ[p].is_empty())
                .ok_or_else(|| {
                    PtasError::InvariantViolation("no empty position for a double".into())
                })?;
            let mover = occ[i].pop().expect("double has two jobs");
            occ[empty] = vec![mover];
        }
    }

    let mut out = x.clone();
    for key in LpSolution::var_order(n) {
        out.set(instance, key, Rational::zero())?;
    }
    let mut moves = Vec::new();
    for (i, slot) in occ.iter().enumerate().skip(1) {
        for &(job, state) in slot {
            out.set(instance, (job, i, state), rat_int(1))?;
            let from = original[&job];
            if from != i {
                moves.push(JobMove { job, from, to: i });
            }
        }
    }
    Ok((out, moves))
}

/// Growth bound of a decrowding move: positions may only grow by the factor
/// `(q + 1) / q`. Holds whenever the crowded positions admit a charging
/// function, as the fixation enumeration guarantees.
pub fn move_within_bound(m: &JobMove, q: usize) -> bool {
    m.to <= m.from || m.to * q <= m.from * (q + 1)
}
