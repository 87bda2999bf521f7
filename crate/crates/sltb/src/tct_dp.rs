//! Exact pseudo-polynomial dynamic program and FPTAS for total completion
//! time on instances whose lower processing times are all zero, plus the
//! reduction from instances with one shared lower time and the uniform-cost
//! greedy.
//!
//! The DP processes jobs in non-increasing order of `p_up`. With `k` tested
//! jobs among the first `j`, an untested job `j` is the smallest of the
//! prefix, runs first among its untested peers, and therefore contributes
//! `p_j * (j - k)` to the total completion time.

use std::collections::BTreeSet;

use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::core::{rat_int, spt_value, CoreError, Instance, JobId, Objective, Rational};
use crate::oracle::OracleResult;

#[derive(Debug, Error)]
pub enum TctDpError {
    #[error("the DP requires every lower processing time to be zero")]
    NonZeroLower,
    #[error("the DP requires integer upper processing times")]
    NonIntegerPUp,
    #[error("upper processing times too large for the DP table")]
    PUpTooLarge,
    #[error("all lower processing times must equal a common value")]
    UnequalLowerTimes,
    #[error("epsilon must be positive")]
    NonPositiveEpsilon,
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// One Pareto state: a reachable total completion time and the minimal
/// budget that attains it.
type State = (u64, Rational);

/// DP table over `(completion-time bound, job prefix, tested count)`.
///
/// Each `(prefix, tested)` cell stores the Pareto frontier of reachable
/// `(total completion time, minimal budget)` pairs, sorted by completion time
/// with strictly decreasing budgets. `min_budget` answers the tabular query
/// "cheapest budget achieving TCT at most C"; `None` plays the role of an
/// infinite entry.
pub struct TctDpTable {
    /// Jobs in non-increasing `p_up` order (ties by ascending id).
    sorted_jobs: Vec<JobId>,
    p_sorted: Vec<u64>,
    costs_sorted: Vec<Rational>,
    /// `frontiers[j][k]` covers the first `j` sorted jobs with exactly `k`
    /// tested.
    frontiers: Vec<Vec<Vec<State>>>,
}

impl TctDpTable {
    pub fn build(instance: &Instance) -> Result<TctDpTable, TctDpError> {
        let n = instance.n();
        for j in instance.jobs() {
            match instance.p_low(j) {
                Some(p) if p.is_zero() => {}
                _ => return Err(TctDpError::NonZeroLower),
            }
        }
        let mut sorted_jobs: Vec<JobId> = instance.jobs().collect();
        sorted_jobs.sort_by(|a, b| instance.p_up(*b).cmp(instance.p_up(*a)).then(a.cmp(b)));
        let p_sorted = sorted_jobs
            .iter()
            .map(|&j| {
                let p = instance.p_up(j);
                if !p.is_integer() {
                    return Err(TctDpError::NonIntegerPUp);
                }
                p.to_integer().to_u64().ok_or(TctDpError::PUpTooLarge)
            })
            .collect::<Result<Vec<_>, _>>()?;
        // Largest possible TCT is sum of p_j * j; guard the u64 arithmetic.
        let mut max_tct: u128 = 0;
        for (idx, &p) in p_sorted.iter().enumerate() {
            max_tct += (p as u128) * (idx as u128 + 1);
        }
        if max_tct > u64::MAX as u128 {
            return Err(TctDpError::PUpTooLarge);
        }
        let costs_sorted: Vec<Rational> = sorted_jobs
            .iter()
            .map(|&j| instance.cost(j).clone())
            .collect();

        let mut frontiers: Vec<Vec<Vec<State>>> = Vec::with_capacity(n + 1);
        frontiers.push(vec![vec![(0, Rational::zero())]]);
        for j in 1..=n {
            let p = p_sorted[j - 1];
            let cost = &costs_sorted[j - 1];
            let prev = &frontiers[j - 1];
            let mut level: Vec<Vec<State>> = Vec::with_capacity(j + 1);
            for k in 0..=j {
                let mut candidates: Vec<State> = Vec::new();
                if k >= 1 {
                    if let Some(states) = prev.get(k - 1) {
                        candidates
                            .extend(states.iter().map(|(t, b)| (*t, b + cost)));
                    }
                }
                if k < j {
                    let contribution = p * (j - k) as u64;
                    candidates.extend(
                        prev[k].iter().map(|(t, b)| (t + contribution, b.clone())),
                    );
                }
                level.push(pareto(candidates));
            }
            frontiers.push(level);
        }

        Ok(TctDpTable {
            sorted_jobs,
            p_sorted,
            costs_sorted,
            frontiers,
        })
    }

    pub fn n(&self) -> usize {
        self.sorted_jobs.len()
    }

    /// Minimal total budget over solutions on the first `prefix` sorted jobs
    /// with exactly `tested` tested jobs and total completion time at most
    /// `c_bound`. `None` means no such solution exists.
    pub fn min_budget(&self, c_bound: u64, prefix: usize, tested: usize) -> Option<Rational> {
        let states = self.frontiers.get(prefix)?.get(tested)?;
        // Budgets strictly decrease along the frontier, so the cheapest entry
        // within the bound is the one with the largest completion time.
        states
            .iter()
            .take_while(|(t, _)| *t <= c_bound)
            .last()
            .map(|(_, b)| b.clone())
    }

    /// Untested total completion time of the full prefix (the `tested = 0`
    /// diagonal of the table).
    pub fn untested_prefix_tct(&self, prefix: usize) -> u64 {
        self.p_sorted[..prefix]
            .iter()
            .enumerate()
            .map(|(idx, &p)| p * (idx as u64 + 1))
            .sum()
    }

    /// Minimal total completion time achievable within `budget`, with a
    /// tested set attaining it. Ties prefer fewer tested jobs.
    pub fn solve(&self, budget: &Rational) -> (u64, BTreeSet<JobId>) {
        let n = self.n();
        let mut best: Option<(u64, usize, usize)> = None;
        for (k, states) in self.frontiers[n].iter().enumerate() {
            for (idx, (t, b)) in states.iter().enumerate() {
                if b <= budget {
                    if best.as_ref().is_none_or(|(bt, _, _)| t < bt) {
                        best = Some((*t, k, idx));
                    }
                    break;
                }
            }
        }
        let (value, k, idx) = best.expect("the untested solution always fits a nonnegative budget");
        (value, self.recover(k, idx))
    }

    /// Walks predecessor states back through the table. Every frontier entry
    /// was generated from a stored entry one level down, so exact membership
    /// lookups suffice; ties prefer the untested branch.
    fn recover(&self, mut k: usize, idx: usize) -> BTreeSet<JobId> {
        let n = self.n();
        let (mut t, mut b) = self.frontiers[n][k][idx].clone();
        let mut tested = BTreeSet::new();
        for j in (1..=n).rev() {
            let p = self.p_sorted[j - 1];
            let contribution = p * (j - k) as u64;
            let untested_pred = (k < j && t >= contribution)
                .then(|| (t - contribution, b.clone()))
                .filter(|(pt, pb)| contains(&self.frontiers[j - 1][k], *pt, pb));
            if let Some((pt, pb)) = untested_pred {
                t = pt;
                b = pb;
                continue;
            }
            let cost = &self.costs_sorted[j - 1];
            let pb = &b - cost;
            debug_assert!(k >= 1 && contains(&self.frontiers[j - 1][k - 1], t, &pb));
            tested.insert(self.sorted_jobs[j - 1]);
            k -= 1;
            b = pb;
        }
        tested
    }
}

fn contains(states: &[State], t: u64, b: &Rational) -> bool {
    states
        .binary_search_by(|(st, _)| st.cmp(&t))
        .is_ok_and(|idx| &states[idx].1 == b)
}

/// Sorts candidates and keeps the non-dominated ones: completion times
/// ascending, budgets strictly descending.
fn pareto(mut candidates: Vec<State>) -> Vec<State> {
    candidates.sort_by(|(t1, b1), (t2, b2)| t1.cmp(t2).then_with(|| b1.cmp(b2)));
    let mut kept: Vec<State> = Vec::with_capacity(candidates.len());
    for (t, b) in candidates {
        match kept.last() {
            Some((_, last_b)) if *last_b <= b => {}
            _ => kept.push((t, b)),
        }
    }
    kept
}

/// Exact minimal total completion time for an all-zero-lower instance with
/// integer upper processing times, plus a tested set achieving it.
pub fn tct_dp_exact(instance: &Instance) -> Result<OracleResult, TctDpError> {
    let table = TctDpTable::build(instance)?;
    let (value, tested) = table.solve(instance.budget());
    debug_assert_eq!(spt_value(instance, &tested)?, rat_int(value as i64));
    Ok(OracleResult {
        best_tested: tested,
        best_value: rat_int(value as i64),
        objective: Objective::Tct,
        subsets_examined: 0,
    })
}

/// Scaling configuration of the FPTAS: rounding step `kappa` derived from a
/// guess of the largest processing time in an optimal schedule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScalingConfig {
    pub kappa: Rational,
    pub p_max_guess: Rational,
    pub epsilon: Rational,
}

impl ScalingConfig {
    pub fn new(p_max_guess: Rational, epsilon: Rational, n: usize) -> ScalingConfig {
        let kappa = &p_max_guess * &epsilon / rat_int((n * n) as i64);
        ScalingConfig {
            kappa,
            p_max_guess,
            epsilon,
        }
    }
}

/// FPTAS for total completion time on all-zero-lower instances. For each
/// guess of the largest processing time appearing in an optimal schedule it
/// rounds every time up to a multiple of `kappa`, solves the rounded instance
/// exactly, evaluates the tested set on the original instance, and keeps the
/// best candidate. The returned value is at most `(1 + epsilon)` times
/// optimal and never below it.
pub fn tct_fptas(
    instance: &Instance,
    epsilon: &Rational,
) -> Result<(BTreeSet<JobId>, Rational), TctDpError> {
    if !epsilon.is_positive() {
        return Err(TctDpError::NonPositiveEpsilon);
    }
    for j in instance.jobs() {
        match instance.p_low(j) {
            Some(p) if p.is_zero() => {}
            _ => return Err(TctDpError::NonZeroLower),
        }
    }
    let n = instance.n();
    let all_jobs: BTreeSet<JobId> = instance.jobs().collect();

    let mut best: Option<(BTreeSet<JobId>, Rational)> = None;
    let mut consider = |tested: BTreeSet<JobId>| -> Result<(), TctDpError> {
        let value = spt_value(instance, &tested)?;
        if best.as_ref().is_none_or(|(_, b)| &value < b) {
            best = Some((tested, value));
        }
        Ok(())
    };

    // Baseline candidate so degenerate instances (every upper time zero, or
    // nothing affordable) always return a set; testing nothing is free.
    consider(BTreeSet::new())?;
    // Degenerate guess: an optimal schedule with no untested job, possible
    // only when the whole job set is affordable.
    if &instance.tested_cost(&all_jobs) <= instance.budget() {
        consider(all_jobs)?;
    }

    let mut guesses: Vec<Rational> = instance
        .jobs()
        .map(|j| instance.p_up(j).clone())
        .filter(|p| p.is_positive())
        .collect();
    guesses.sort();
    guesses.dedup();

    for guess in guesses {
        // Jobs larger than the guessed maximum must be tested.
        let forced: BTreeSet<JobId> = instance
            .jobs()
            .filter(|&j| instance.p_up(j) > &guess)
            .collect();
        let forced_cost = instance.tested_cost(&forced);
        if &forced_cost > instance.budget() {
            continue;
        }
        let remaining: Vec<JobId> = instance.jobs().filter(|j| !forced.contains(j)).collect();
        let config = ScalingConfig::new(guess, epsilon.clone(), n);

        let rounded: Vec<Rational> = remaining
            .iter()
            .map(|&j| {
                let steps = (instance.p_up(j) / &config.kappa).ceil();
                let p = instance.p_up(j);
                debug_assert!(&steps * &config.kappa >= *p);
                debug_assert!(&steps * &config.kappa <= p + &config.kappa);
                steps
            })
            .collect();
        let sub = Instance::offline(
            rounded,
            vec![Rational::zero(); remaining.len()],
            remaining.iter().map(|&j| instance.cost(j).clone()).collect(),
            instance.budget() - &forced_cost,
        )?;
        let sub_result = tct_dp_exact(&sub)?;
        let mut tested = forced;
        tested.extend(sub_result.best_tested.iter().map(|&idx| remaining[idx.0]));
        consider(tested)?;
    }

    Ok(best.expect("the baseline candidate always exists"))
}

/// Uniform-cost greedy for all-zero-lower instances: tests the `k` largest
/// jobs (ties by ascending id), which is exactly optimal when every test
/// costs one unit. The instance's cost and budget fields are ignored.
pub fn tct_uniform_greedy(
    instance: &Instance,
    k: usize,
) -> Result<(BTreeSet<JobId>, Rational), TctDpError> {
    for j in instance.jobs() {
        match instance.p_low(j) {
            Some(p) if p.is_zero() => {}
            _ => return Err(TctDpError::NonZeroLower),
        }
    }
    let k = k.min(instance.n());
    let mut by_size: Vec<JobId> = instance.jobs().collect();
    by_size.sort_by(|a, b| instance.p_up(*b).cmp(instance.p_up(*a)).then(a.cmp(b)));
    let tested: BTreeSet<JobId> = by_size.iter().take(k).copied().collect();
    // Tested jobs run in zero time; the untested rest follows in SPT order,
    // so the r-th largest untested job sits at reverse position r.
    let mut value = Rational::zero();
    for (rank, &j) in by_size[k..].iter().enumerate() {
        value += rat_int(rank as i64 + 1) * instance.p_up(j);
    }
    Ok((tested, value))
}

/// Reduces an instance whose lower times all equal a common value `v` to the
/// all-zero-lower auxiliary instance: upper times shrink by `v` and any
/// tested set's TCT shifts by exactly `offset = v * n(n+1)/2`, so optimal
/// tested sets coincide.
pub fn reduce_equal_low(instance: &Instance) -> Result<(Instance, Rational), TctDpError> {
    let first = instance
        .p_low(JobId(0))
        .ok_or(TctDpError::UnequalLowerTimes)?
        .clone();
    for j in instance.jobs() {
        match instance.p_low(j) {
            Some(p) if *p == first => {}
            _ => return Err(TctDpError::UnequalLowerTimes),
        }
    }
    let n = instance.n() as i64;
    let reduced = Instance::offline(
        instance.jobs().map(|j| instance.p_up(j) - &first).collect(),
        vec![Rational::zero(); instance.n()],
        instance.jobs().map(|j| instance.cost(j).clone()).collect(),
        instance.budget().clone(),
    )?;
    let offset = &first * rat_int(n * (n + 1) / 2);
    Ok((reduced, offset))
}
