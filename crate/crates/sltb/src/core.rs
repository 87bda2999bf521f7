//! Instance and schedule data model, cost evaluation, SPT ordering and
//! validation. Everything else in the crate builds on this module.
//!
//! Processing times, costs and budgets are exact rationals. A schedule is a
//! job order plus a set of tested jobs; a tested job runs at its lower
//! processing time, an untested one at its upper processing time.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact rational scalar used throughout the model.
pub type Rational = num_rational::BigRational;

/// Rational from an integer.
pub fn rat_int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Rational `num/den`.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Identifier of a job. Internally zero-based; displayed one-based to match
/// the JSON documents, which number jobs 1..n.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct JobId(pub usize);

impl JobId {
    pub fn from_one_based(id: usize) -> JobId {
        assert!(id >= 1, "job ids are numbered from 1");
        JobId(id - 1)
    }

    pub fn one_based(self) -> usize {
        self.0 + 1
    }
}

impl fmt::Debug for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "j{}", self.one_based())
    }
}

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "j{}", self.one_based())
    }
}

/// Whether a job runs tested (lower processing time) or untested (upper).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestState {
    Untested,
    Tested,
}

/// Optimization objective for a schedule.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Tct,
    Makespan,
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::Tct => write!(f, "tct"),
            Objective::Makespan => write!(f, "makespan"),
        }
    }
}

/// Positions can be counted from the front of the schedule (position 1 runs
/// first) or from the back (position 1 runs last). The reverse convention
/// makes a job at position `i` contribute `i * p` to the total completion
/// time.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PositionConvention {
    Forward,
    Reverse,
}

impl PositionConvention {
    /// Converts a 1-based position to the opposite convention.
    pub fn flip(self, n: usize, position: usize) -> usize {
        debug_assert!((1..=n).contains(&position));
        n - position + 1
    }
}

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("budget exceeded: tested cost {used} exceeds budget {budget}")]
    BudgetExceeded { used: Rational, budget: Rational },
    #[error("job {0} is tested but has no lower processing time")]
    MissingLowerTime(JobId),
    #[error("malformed instance document: {0}")]
    Document(String),
}

/// An SLTB instance: per-job upper/lower processing times and testing costs,
/// plus the total testing budget. Lower processing times are optional so one
/// type serves both the offline model and the oblivious view, where they are
/// hidden.
///
/// Instances are immutable after construction and safe to share across
/// threads.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Instance {
    p_up: Vec<Rational>,
    p_low: Vec<Option<Rational>>,
    cost: Vec<Rational>,
    budget: Rational,
}

impl Instance {
    pub fn new(
        p_up: Vec<Rational>,
        p_low: Vec<Option<Rational>>,
        cost: Vec<Rational>,
        budget: Rational,
    ) -> Result<Instance, CoreError> {
        let n = p_up.len();
        if n == 0 {
            return Err(CoreError::InvalidInstance("need at least one job".into()));
        }
        if p_low.len() != n || cost.len() != n {
            return Err(CoreError::InvalidInstance(format!(
                "length mismatch: p_up {}, p_low {}, cost {}",
                n,
                p_low.len(),
                cost.len()
            )));
        }
        for (idx, p) in p_up.iter().enumerate() {
            if p.is_negative() {
                return Err(CoreError::InvalidInstance(format!(
                    "p_up of {} is negative",
                    JobId(idx)
                )));
            }
        }
        for (idx, low) in p_low.iter().enumerate() {
            if let Some(low) = low {
                if low.is_negative() || low > &p_up[idx] {
                    return Err(CoreError::InvalidInstance(format!(
                        "p_low of {} must lie in [0, p_up]",
                        JobId(idx)
                    )));
                }
            }
        }
        for (idx, c) in cost.iter().enumerate() {
            if c.is_negative() {
                return Err(CoreError::InvalidInstance(format!(
                    "cost of {} is negative",
                    JobId(idx)
                )));
            }
        }
        if budget.is_negative() {
            return Err(CoreError::InvalidInstance("budget is negative".into()));
        }
        Ok(Instance {
            p_up,
            p_low,
            cost,
            budget,
        })
    }

    /// Convenience constructor for an instance with all lower times known.
    pub fn offline(
        p_up: Vec<Rational>,
        p_low: Vec<Rational>,
        cost: Vec<Rational>,
        budget: Rational,
    ) -> Result<Instance, CoreError> {
        let p_low = p_low.into_iter().map(Some).collect();
        Instance::new(p_up, p_low, cost, budget)
    }

    pub fn n(&self) -> usize {
        self.p_up.len()
    }

    pub fn jobs(&self) -> impl Iterator<Item = JobId> {
        (0..self.n()).map(JobId)
    }

    pub fn p_up(&self, j: JobId) -> &Rational {
        &self.p_up[j.0]
    }

    pub fn p_low(&self, j: JobId) -> Option<&Rational> {
        self.p_low[j.0].as_ref()
    }

    pub fn cost(&self, j: JobId) -> &Rational {
        &self.cost[j.0]
    }

    pub fn budget(&self) -> &Rational {
        &self.budget
    }

    pub fn has_all_lower(&self) -> bool {
        self.p_low.iter().all(|p| p.is_some())
    }

    /// Realized processing time of `j` under the given test state.
    pub fn realized(&self, j: JobId, state: TestState) -> Result<Rational, CoreError> {
        match state {
            TestState::Untested => Ok(self.p_up[j.0].clone()),
            TestState::Tested => self.p_low[j.0]
                .clone()
                .ok_or(CoreError::MissingLowerTime(j)),
        }
    }

    /// Total testing cost of a set of jobs.
    pub fn tested_cost(&self, tested: &BTreeSet<JobId>) -> Rational {
        tested
            .iter()
            .fold(Rational::zero(), |acc, j| acc + &self.cost[j.0])
    }

    /// Checks that the set is affordable; slack below the budget is legal.
    pub fn check_budget(&self, tested: &BTreeSet<JobId>) -> Result<(), CoreError> {
        let used = self.tested_cost(tested);
        if used > self.budget {
            return Err(CoreError::BudgetExceeded {
                used,
                budget: self.budget.clone(),
            });
        }
        Ok(())
    }

    /// Strips the lower processing times (the oblivious view of the instance).
    pub fn hide_lower(&self) -> Instance {
        Instance {
            p_up: self.p_up.clone(),
            p_low: vec![None; self.n()],
            cost: self.cost.clone(),
            budget: self.budget.clone(),
        }
    }

    /// Replaces every lower processing time with zero. Used by the oblivious
    /// algorithms and the hardness reductions.
    pub fn with_zero_lower(&self) -> Instance {
        Instance {
            p_up: self.p_up.clone(),
            p_low: vec![Some(Rational::zero()); self.n()],
            cost: self.cost.clone(),
            budget: self.budget.clone(),
        }
    }

    /// Replaces the lower processing times wholesale. Vector length must
    /// match and each entry must lie in `[0, p_up]`.
    pub fn with_lower(&self, p_low: Vec<Rational>) -> Result<Instance, CoreError> {
        Instance::offline(
            self.p_up.clone(),
            p_low,
            self.cost.clone(),
            self.budget.clone(),
        )
    }
}

/// A schedule: a processing order plus the set of tested jobs.
///
/// `order[k]` is the job processed (k+1)-th. Schedules are plain values;
/// [`Schedule::validate`] checks the bijection and budget against an
/// instance.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Schedule {
    pub order: Vec<JobId>,
    pub tested: BTreeSet<JobId>,
}

impl Schedule {
    pub fn new(order: Vec<JobId>, tested: BTreeSet<JobId>) -> Schedule {
        Schedule { order, tested }
    }

    pub fn state_of(&self, j: JobId) -> TestState {
        if self.tested.contains(&j) {
            TestState::Tested
        } else {
            TestState::Untested
        }
    }

    /// Forward position (1-based) of each job; inverse of `order`.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0usize; self.order.len()];
        for (k, j) in self.order.iter().enumerate() {
            pos[j.0] = k + 1;
        }
        pos
    }

    pub fn validate(&self, instance: &Instance) -> Result<(), CoreError> {
        let n = instance.n();
        if self.order.len() != n {
            return Err(CoreError::InvalidSchedule(format!(
                "order has {} entries for {} jobs",
                self.order.len(),
                n
            )));
        }
        let mut seen = vec![false; n];
        for j in &self.order {
            if j.0 >= n {
                return Err(CoreError::InvalidSchedule(format!("unknown job {j}")));
            }
            if seen[j.0] {
                return Err(CoreError::InvalidSchedule(format!(
                    "job {j} scheduled twice"
                )));
            }
            seen[j.0] = true;
        }
        for j in &self.tested {
            if j.0 >= n {
                return Err(CoreError::InvalidSchedule(format!("unknown tested job {j}")));
            }
        }
        instance.check_budget(&self.tested)?;
        Ok(())
    }
}

/// Total completion time of a schedule: the sum over jobs of their completion
/// times, equivalently the sum of `reverse position * realized time`.
pub fn total_completion_time(
    instance: &Instance,
    schedule: &Schedule,
) -> Result<Rational, CoreError> {
    schedule.validate(instance)?;
    let n = instance.n();
    let mut total = Rational::zero();
    for (k, &j) in schedule.order.iter().enumerate() {
        let p = instance.realized(j, schedule.state_of(j))?;
        // Job at forward position k+1 is counted by the n-k jobs at or after it.
        total += p * rat_int((n - k) as i64);
    }
    Ok(total)
}

/// Makespan of a schedule. On one gapless machine this is the total realized
/// work, independent of the order.
pub fn makespan(instance: &Instance, schedule: &Schedule) -> Result<Rational, CoreError> {
    schedule.validate(instance)?;
    let mut total = Rational::zero();
    for j in instance.jobs() {
        total += instance.realized(j, schedule.state_of(j))?;
    }
    Ok(total)
}

/// Shortest-processing-time-first schedule for a given tested set. Ties are
/// broken by ascending job id, which keeps results deterministic; any tie
/// order is TCT-optimal.
pub fn spt_schedule(
    instance: &Instance,
    tested: &BTreeSet<JobId>,
) -> Result<Schedule, CoreError> {
    instance.check_budget(tested)?;
    let mut keyed: Vec<(Rational, JobId)> = Vec::with_capacity(instance.n());
    for j in instance.jobs() {
        let state = if tested.contains(&j) {
            TestState::Tested
        } else {
            TestState::Untested
        };
        keyed.push((instance.realized(j, state)?, j));
    }
    keyed.sort();
    Ok(Schedule::new(
        keyed.into_iter().map(|(_, j)| j).collect(),
        tested.clone(),
    ))
}

/// Total completion time of the SPT schedule for `tested`; the optimal TCT
/// achievable with that tested set.
pub fn spt_value(instance: &Instance, tested: &BTreeSet<JobId>) -> Result<Rational, CoreError> {
    let schedule = spt_schedule(instance, tested)?;
    total_completion_time(instance, &schedule)
}

/// Makespan achieved by a tested set (order-independent).
pub fn makespan_value(
    instance: &Instance,
    tested: &BTreeSet<JobId>,
) -> Result<Rational, CoreError> {
    instance.check_budget(tested)?;
    let mut total = Rational::zero();
    for j in instance.jobs() {
        let state = if tested.contains(&j) {
            TestState::Tested
        } else {
            TestState::Untested
        };
        total += instance.realized(j, state)?;
    }
    Ok(total)
}

/// Evaluates a tested set under either objective via its optimal order.
pub fn objective_value(
    instance: &Instance,
    tested: &BTreeSet<JobId>,
    objective: Objective,
) -> Result<Rational, CoreError> {
    match objective {
        Objective::Tct => spt_value(instance, tested),
        Objective::Makespan => makespan_value(instance, tested),
    }
}

/// Formats a rational as `num/den`, or just `num` for integers.
pub fn rational_to_string(r: &Rational) -> String {
    if r.denom() == &BigInt::from(1) {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `num` or `num/den` into a rational.
pub fn rational_from_str(s: &str) -> Result<Rational, CoreError> {
    let s = s.trim();
    let parse_int = |part: &str| {
        BigInt::from_str(part.trim())
            .map_err(|e| CoreError::Document(format!("bad rational {s:?}: {e}")))
    };
    match s.split_once('/') {
        None => Ok(Rational::from_integer(parse_int(s)?)),
        Some((num, den)) => {
            let den = parse_int(den)?;
            if den.is_zero() {
                return Err(CoreError::Document(format!("zero denominator in {s:?}")));
            }
            Ok(Rational::new(parse_int(num)?, den))
        }
    }
}

/// JSON document form of an instance. Rationals are serialized as `num/den`
/// strings so round trips stay exact; lower times may be `null`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceDoc {
    pub n: usize,
    pub p_up: Vec<String>,
    pub p_low: Vec<Option<String>>,
    pub cost: Vec<String>,
    pub budget: String,
}

impl InstanceDoc {
    pub fn from_instance(instance: &Instance) -> InstanceDoc {
        InstanceDoc {
            n: instance.n(),
            p_up: instance.p_up.iter().map(rational_to_string).collect(),
            p_low: instance
                .p_low
                .iter()
                .map(|p| p.as_ref().map(rational_to_string))
                .collect(),
            cost: instance.cost.iter().map(rational_to_string).collect(),
            budget: rational_to_string(&instance.budget),
        }
    }

    pub fn to_instance(&self) -> Result<Instance, CoreError> {
        if self.p_up.len() != self.n {
            return Err(CoreError::Document(format!(
                "n is {} but p_up has {} entries",
                self.n,
                self.p_up.len()
            )));
        }
        let p_up = self
            .p_up
            .iter()
            .map(|s| rational_from_str(s))
            .collect::<Result<Vec<_>, _>>()?;
        let p_low = self
            .p_low
            .iter()
            .map(|s| s.as_ref().map(|s| rational_from_str(s)).transpose())
            .collect::<Result<Vec<_>, _>>()?;
        let cost = self
            .cost
            .iter()
            .map(|s| rational_from_str(s))
            .collect::<Result<Vec<_>, _>>()?;
        Instance::new(p_up, p_low, cost, rational_from_str(&self.budget)?)
    }
}

/// Parses an instance from its JSON document.
pub fn instance_from_json(json: &str) -> Result<Instance, CoreError> {
    let doc: InstanceDoc =
        serde_json::from_str(json).map_err(|e| CoreError::Document(e.to_string()))?;
    doc.to_instance()
}

/// Serializes an instance to its JSON document.
pub fn instance_to_json(instance: &Instance) -> String {
    serde_json::to_string_pretty(&InstanceDoc::from_instance(instance))
        .expect("instance document serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use itertools::Itertools;

    fn ids(one_based: &[usize]) -> BTreeSet<JobId> {
        one_based.iter().map(|&k| JobId::from_one_based(k)).collect()
    }

    fn uniform_cost_instance(p_up: &[i64], budget: i64) -> Instance {
        let n = p_up.len();
        Instance::offline(
            p_up.iter().map(|&p| rat_int(p)).collect(),
            vec![Rational::zero(); n],
            vec![rat_int(1); n],
            rat_int(budget),
        )
        .unwrap()
    }

    #[test]
    fn single_job_tct_and_makespan() {
        let inst = Instance::new(
            vec![rat_int(5)],
            vec![None],
            vec![rat_int(1)],
            rat_int(0),
        )
        .unwrap();
        let sched = Schedule::new(vec![JobId(0)], BTreeSet::new());
        assert_eq!(total_completion_time(&inst, &sched).unwrap(), rat_int(5));
        assert_eq!(makespan(&inst, &sched).unwrap(), rat_int(5));
    }

    #[test]
    fn spt_is_minimal_over_all_orderings() {
        // p_up = (3,1,2), nothing tested: SPT runs j2, j3, j1 and TCT is 10.
        let inst = uniform_cost_instance(&[3, 1, 2], 0);
        let spt = spt_schedule(&inst, &BTreeSet::new()).unwrap();
        assert_eq!(
            spt.order,
            vec![JobId::from_one_based(2), JobId::from_one_based(3), JobId::from_one_based(1)]
        );
        let spt_tct = total_completion_time(&inst, &spt).unwrap();
        let best = (0..3)
            .map(JobId)
            .permutations(3)
            .map(|order| {
                total_completion_time(&inst, &Schedule::new(order, BTreeSet::new())).unwrap()
            })
            .min()
            .unwrap();
        assert_eq!(spt_tct, rat_int(10));
        assert_eq!(spt_tct, best);
    }

    #[test]
    fn tct_of_uniform_instance_with_useless_tests() {
        // Four unit jobs whose lower times equal their upper times: testing
        // changes nothing and TCT is n(n+1)/2 regardless of the tested pair.
        let inst = Instance::offline(
            vec![rat_int(1); 4],
            vec![rat_int(1); 4],
            vec![rat_int(1); 4],
            rat_int(2),
        )
        .unwrap();
        for pair in (1..=4).combinations(2) {
            let tested = ids(&pair);
            assert_eq!(spt_value(&inst, &tested).unwrap(), rat_int(10));
            assert_eq!(makespan_value(&inst, &tested).unwrap(), rat_int(4));
        }
    }

    #[test]
    fn makespan_counts_realized_work() {
        let inst = Instance::offline(
            vec![rat_int(10), rat_int(7)],
            vec![rat_int(2), rat_int(1)],
            vec![rat_int(1), rat_int(1)],
            rat_int(1),
        )
        .unwrap();
        // Brute force over tested subsets confirms 2 + 7 = 9 for tested = {1},
        // which is also the best single test under budget 1.
        assert_eq!(makespan_value(&inst, &ids(&[1])).unwrap(), rat_int(9));
        let mut best = makespan_value(&inst, &BTreeSet::new()).unwrap();
        for subset in [ids(&[1]), ids(&[2])] {
            best = best.min(makespan_value(&inst, &subset).unwrap());
        }
        assert_eq!(best, rat_int(9));
    }

    #[test]
    fn spt_with_tested_jobs_prefers_lowered_times() {
        // p_up=(3,2), p_low=(0,0), testing job 1 gives TCT 2; brute force over
        // tested subsets and orders confirms 2 is the optimum.
        let inst = Instance::offline(
            vec![rat_int(3), rat_int(2)],
            vec![Rational::zero(), Rational::zero()],
            vec![rat_int(1), rat_int(1)],
            rat_int(1),
        )
        .unwrap();
        let tested = ids(&[1]);
        let sched = spt_schedule(&inst, &tested).unwrap();
        assert_eq!(sched.order[0], JobId::from_one_based(1));
        assert_eq!(total_completion_time(&inst, &sched).unwrap(), rat_int(2));

        let mut best: Option<Rational> = None;
        for subset in [BTreeSet::new(), ids(&[1]), ids(&[2])] {
            if inst.check_budget(&subset).is_err() {
                continue;
            }
            for order in (0..2).map(JobId).permutations(2) {
                let v =
                    total_completion_time(&inst, &Schedule::new(order, subset.clone())).unwrap();
                best = Some(best.map_or(v.clone(), |b: Rational| b.min(v)));
            }
        }
        assert_eq!(best.unwrap(), rat_int(2));
    }

    #[test]
    fn spt_breaks_ties_by_job_id() {
        let inst = uniform_cost_instance(&[2, 2, 2], 0);
        let sched = spt_schedule(&inst, &BTreeSet::new()).unwrap();
        assert_eq!(sched.order, vec![JobId(0), JobId(1), JobId(2)]);
    }

    #[test]
    fn budget_is_enforced() {
        let inst = uniform_cost_instance(&[3, 1], 1);
        assert!(spt_schedule(&inst, &ids(&[1, 2])).is_err());
        // Slack below the budget is legal.
        assert!(spt_schedule(&inst, &BTreeSet::new()).is_ok());
    }

    #[test]
    fn missing_lower_time_is_reported() {
        let inst = Instance::new(
            vec![rat_int(3), rat_int(1)],
            vec![None, Some(Rational::zero())],
            vec![rat_int(1), rat_int(1)],
            rat_int(2),
        )
        .unwrap();
        let err = spt_schedule(&inst, &ids(&[1])).unwrap_err();
        assert!(matches!(err, CoreError::MissingLowerTime(j) if j == JobId(0)));
    }

    #[test]
    fn invalid_schedules_are_rejected() {
        let inst = uniform_cost_instance(&[1, 2], 0);
        let twice = Schedule::new(vec![JobId(0), JobId(0)], BTreeSet::new());
        assert!(total_completion_time(&inst, &twice).is_err());
        let short = Schedule::new(vec![JobId(0)], BTreeSet::new());
        assert!(makespan(&inst, &short).is_err());
    }

    #[test]
    fn position_convention_round_trip() {
        let n = 7;
        for i in 1..=n {
            let rev = PositionConvention::Forward.flip(n, i);
            assert_eq!(PositionConvention::Reverse.flip(n, rev), i);
        }
    }

    #[test]
    fn reverse_position_sum_equals_completion_sum() {
        let inst = uniform_cost_instance(&[4, 2, 7, 1], 0);
        let sched = spt_schedule(&inst, &BTreeSet::new()).unwrap();
        let n = inst.n();
        // Explicit prefix-sum evaluation.
        let mut prefix = Rational::zero();
        let mut tct = Rational::zero();
        for &j in &sched.order {
            prefix += inst.p_up(j);
            tct += prefix.clone();
        }
        // Reverse-position weighted sum.
        let mut weighted = Rational::zero();
        for (k, &j) in sched.order.iter().enumerate() {
            let reverse = PositionConvention::Forward.flip(n, k + 1);
            weighted += rat_int(reverse as i64) * inst.p_up(j);
        }
        assert_eq!(tct, weighted);
        assert_eq!(tct, total_completion_time(&inst, &sched).unwrap());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let inst = Instance::new(
            vec![rat(7, 3), rat_int(2)],
            vec![Some(rat(1, 6)), None],
            vec![rat(5, 2), rat_int(0)],
            rat(11, 4),
        )
        .unwrap();
        let json = instance_to_json(&inst);
        let back = instance_from_json(&json).unwrap();
        assert_eq!(inst, back);
    }

    #[test]
    fn rational_strings() {
        assert_eq!(rational_to_string(&rat(4, 2)), "2");
        assert_eq!(rational_to_string(&rat(-3, 9)), "-1/3");
        assert_eq!(rational_from_str("7/21").unwrap(), rat(1, 3));
        assert_eq!(rational_from_str(" 5 ").unwrap(), rat_int(5));
        assert!(rational_from_str("1/0").is_err());
        assert!(rational_from_str("abc").is_err());
    }
}
