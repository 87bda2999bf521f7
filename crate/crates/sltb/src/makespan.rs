//! Offline makespan solvers. Selecting a tested set to minimize the makespan
//! is a 0-1 knapsack: testing job `j` saves `p_up[j] - p_low[j]` units of work
//! at weight `cost[j]`, subject to the budget as capacity.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::core::{CoreError, Instance, JobId, Objective, Rational};
use crate::oracle::OracleResult;

/// Caps on the dynamic-programming table sizes; both solvers are desk-scale
/// instruments, not industrial knapsack codes.
const MAX_WEIGHT_CELLS: u64 = 20_000_000;
const MAX_PROFIT_CELLS: u64 = 20_000_000;

#[derive(Debug, Error)]
pub enum MakespanError {
    #[error("all lower processing times are required")]
    MissingLowerTimes,
    #[error("costs cannot be integerized: {0}")]
    NonIntegerizableCosts(String),
    #[error("epsilon must be positive")]
    NonPositiveEpsilon,
    #[error("scaled profit table too large ({0} cells); epsilon is too small")]
    ProfitTableTooLarge(u64),
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// Knapsack view of a makespan instance: testing job `j` is an item of value
/// `p_up[j] - p_low[j]` and weight `cost[j]`, with the budget as capacity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KnapsackView {
    pub values: Vec<Rational>,
    pub weights: Vec<Rational>,
    pub capacity: Rational,
}

impl KnapsackView {
    pub fn from_instance(instance: &Instance) -> Result<KnapsackView, MakespanError> {
        if !instance.has_all_lower() {
            return Err(MakespanError::MissingLowerTimes);
        }
        let values = instance
            .jobs()
            .map(|j| instance.p_up(j) - instance.p_low(j).unwrap())
            .collect();
        Ok(KnapsackView {
            values,
            weights: instance.jobs().map(|j| instance.cost(j).clone()).collect(),
            capacity: instance.budget().clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn profit(&self, selected: &BTreeSet<JobId>) -> Rational {
        selected
            .iter()
            .fold(Rational::zero(), |acc, j| acc + &self.values[j.0])
    }
}

/// Makespan of a tested set via the knapsack identity
/// `total p_up - profit(tested)`, asserted against the direct evaluation.
fn makespan_of(instance: &Instance, view: &KnapsackView, tested: &BTreeSet<JobId>) -> Rational {
    let total: Rational = instance
        .jobs()
        .fold(Rational::zero(), |acc, j| acc + instance.p_up(j));
    let value = total - view.profit(tested);
    debug_assert_eq!(
        value,
        instance
            .jobs()
            .map(|j| {
                if tested.contains(&j) {
                    instance.p_low(j).unwrap().clone()
                } else {
                    instance.p_up(j).clone()
                }
            })
            .fold(Rational::zero(), |acc, p| acc + p)
    );
    value
}

/// Scales the weights and the capacity by the least common multiple of the
/// weight denominators, yielding integer weights and an integer capacity
/// (the capacity is floored; fractional slack below the next weight unit can
/// never be spent).
fn integerize_weights(view: &KnapsackView) -> Result<(Vec<u64>, u64), MakespanError> {
    let mut scale = BigInt::one();
    for w in &view.weights {
        scale = scale.lcm(w.denom());
    }
    let scaled = |r: &Rational| -> BigInt { (r * Rational::from_integer(scale.clone())).to_integer() };
    let total: BigInt = view.weights.iter().map(scaled).sum();
    let capacity_big = (view.capacity.clone() * Rational::from_integer(scale.clone()))
        .floor()
        .to_integer()
        .min(total);
    let capacity = capacity_big
        .to_u64()
        .filter(|&c| c < MAX_WEIGHT_CELLS)
        .ok_or_else(|| {
            MakespanError::NonIntegerizableCosts(format!(
                "scaled capacity {capacity_big} overflows the weight table"
            ))
        })?;
    let weights = view
        .weights
        .iter()
        .map(|w| {
            scaled(w).to_u64().ok_or_else(|| {
                MakespanError::NonIntegerizableCosts(format!(
                    "scaled cost {w} overflows 64 bits"
                ))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((weights, capacity))
}

/// Exact optimal tested set for makespan via a weight-indexed knapsack DP.
/// Zero-gain jobs are never tested, so an all-slack instance returns the
/// empty set.
pub fn makespan_dp_exact(instance: &Instance) -> Result<OracleResult, MakespanError> {
    let view = KnapsackView::from_instance(instance)?;
    let (weights, capacity) = integerize_weights(&view)?;
    let n = view.len();
    let cells = (n as u64) * (capacity + 1);
    if cells > MAX_WEIGHT_CELLS {
        return Err(MakespanError::NonIntegerizableCosts(format!(
            "weight table needs {cells} cells"
        )));
    }

    let cap = capacity as usize;
    let mut best = vec![Rational::zero(); cap + 1];
    let mut keep = vec![vec![false; cap + 1]; n];
    for item in 0..n {
        let w = weights[item] as usize;
        if w > cap {
            continue;
        }
        let value = &view.values[item];
        for b in (w..=cap).rev() {
            let candidate = &best[b - w] + value;
            if candidate > best[b] {
                best[b] = candidate;
                keep[item][b] = true;
            }
        }
    }

    let mut tested = BTreeSet::new();
    let mut b = cap;
    for item in (0..n).rev() {
        if keep[item][b] {
            tested.insert(JobId(item));
            b -= weights[item] as usize;
        }
    }
    debug_assert_eq!(view.profit(&tested), best[cap]);

    Ok(OracleResult {
        best_value: makespan_of(instance, &view, &tested),
        best_tested: tested,
        objective: Objective::Makespan,
        subsets_examined: 0,
    })
}

/// FPTAS for offline makespan: value-scaled knapsack profits combined with
/// guessing the largest untested gain in an optimal solution. Returns a
/// tested set whose true makespan is at most `(1 + epsilon)` times optimal.
pub fn makespan_fptas(
    instance: &Instance,
    epsilon: &Rational,
) -> Result<(BTreeSet<JobId>, Rational), MakespanError> {
    if !epsilon.is_positive() {
        return Err(MakespanError::NonPositiveEpsilon);
    }
    let view = KnapsackView::from_instance(instance)?;
    let n = view.len();
    let total_lower: Rational = instance
        .jobs()
        .fold(Rational::zero(), |acc, j| acc + instance.p_low(j).unwrap());

    let mut guesses: Vec<Rational> = vec![Rational::zero()];
    guesses.extend(view.values.iter().cloned());
    guesses.sort();
    guesses.dedup();

    let mut best: Option<(BTreeSet<JobId>, Rational)> = None;
    for guess in &guesses {
        // Jobs with a larger gain than the guessed largest untested gain must
        // all be tested for the guess to be consistent.
        let forced: BTreeSet<JobId> = instance
            .jobs()
            .filter(|&j| &view.values[j.0] > guess)
            .collect();
        let forced_cost = instance.tested_cost(&forced);
        if &forced_cost > instance.budget() {
            continue;
        }
        let remaining_budget = instance.budget() - &forced_cost;
        let items: Vec<JobId> = instance.jobs().filter(|j| !forced.contains(j)).collect();

        // A correct guess lower-bounds the optimal makespan by
        // `total_lower + guess`, which sizes the scaling step.
        let bound = &total_lower + guess;
        let mut tested = forced.clone();
        if !bound.is_zero() {
            let mu = &bound * epsilon / crate::core::rat_int(n as i64);
            let scaled: Vec<u64> = items
                .iter()
                .map(|j| (&view.values[j.0] / &mu).floor().to_integer().to_u64().unwrap_or(u64::MAX))
                .collect();
            let profit_cap: u64 = scaled.iter().sum();
            let cells = (items.len() as u64).saturating_mul(profit_cap.saturating_add(1));
            if cells > MAX_PROFIT_CELLS {
                return Err(MakespanError::ProfitTableTooLarge(cells));
            }
            tested.extend(max_profit_selection(
                instance,
                &items,
                &scaled,
                &remaining_budget,
            ));
        }
        let value = makespan_of(instance, &view, &tested);
        if best.as_ref().is_none_or(|(_, b)| &value < b) {
            best = Some((tested, value));
        }
    }

    // All guesses can be infeasible only if even testing every job with a
    // positive gain exceeds the budget with guess = max gain forced-free,
    // which cannot happen: the largest guess forces nothing.
    Ok(best.expect("the largest guess is always feasible"))
}

/// Profit-indexed knapsack DP: minimal total weight for each achievable
/// scaled profit, then the largest profit affordable within the budget.
fn max_profit_selection(
    instance: &Instance,
    items: &[JobId],
    scaled: &[u64],
    budget: &Rational,
) -> BTreeSet<JobId> {
    let profit_cap: usize = scaled.iter().map(|&v| v as usize).sum();
    let mut min_weight: Vec<Option<Rational>> = vec![None; profit_cap + 1];
    min_weight[0] = Some(Rational::zero());
    let mut keep = vec![vec![false; profit_cap + 1]; items.len()];
    for (idx, &job) in items.iter().enumerate() {
        let v = scaled[idx] as usize;
        if v == 0 {
            continue;
        }
        let w = instance.cost(job);
        for p in (v..=profit_cap).rev() {
            let Some(base) = min_weight[p - v].clone() else {
                continue;
            };
            let candidate = base + w;
            if min_weight[p].as_ref().is_none_or(|cur| &candidate < cur) {
                min_weight[p] = Some(candidate);
                keep[idx][p] = true;
            }
        }
    }
    let mut target = (0..=profit_cap)
        .rev()
        .find(|&p| min_weight[p].as_ref().is_some_and(|w| w <= budget))
        .unwrap_or(0);
    let mut selection = BTreeSet::new();
    for idx in (0..items.len()).rev() {
        if keep[idx][target] {
            selection.insert(items[idx]);
            target -= scaled[idx] as usize;
        }
    }
    selection
}

/// Uniform-cost greedy: tests the `k` jobs with the largest gain
/// `p_up - p_low` (ties by ascending job id). Exactly optimal when every
/// test costs one unit and the budget is `k`; the instance's own cost and
/// budget fields are ignored.
pub fn makespan_uniform_greedy(
    instance: &Instance,
    k: usize,
) -> Result<(BTreeSet<JobId>, Rational), MakespanError> {
    if !instance.has_all_lower() {
        return Err(MakespanError::MissingLowerTimes);
    }
    let view = KnapsackView::from_instance(instance)?;
    let k = k.min(instance.n());
    let mut by_gain: Vec<JobId> = instance.jobs().collect();
    by_gain.sort_by(|a, b| view.values[b.0].cmp(&view.values[a.0]).then(a.cmp(b)));
    let tested: BTreeSet<JobId> = by_gain.into_iter().take(k).collect();
    let value = makespan_of(instance, &view, &tested);
    Ok((tested, value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{rat, rat_int};
    use crate::oracle::{exact_solve, DEFAULT_ORACLE_LIMIT};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ids(one_based: &[usize]) -> BTreeSet<JobId> {
        one_based.iter().map(|&k| JobId::from_one_based(k)).collect()
    }

    fn random_instance(rng: &mut ChaCha8Rng, n: usize) -> Instance {
        let p_up: Vec<i64> = (0..n).map(|_| rng.gen_range(0..=20)).collect();
        let p_low: Vec<i64> = p_up.iter().map(|&p| rng.gen_range(0..=p)).collect();
        let cost: Vec<i64> = (0..n).map(|_| rng.gen_range(0..=10)).collect();
        let total: i64 = cost.iter().sum();
        let budget = rng.gen_range(0..=total.max(1));
        Instance::offline(
            p_up.into_iter().map(rat_int).collect(),
            p_low.into_iter().map(rat_int).collect(),
            cost.into_iter().map(rat_int).collect(),
            rat_int(budget),
        )
        .unwrap()
    }

    #[test]
    fn dp_matches_brute_force_pair() {
        let inst = Instance::offline(
            vec![rat_int(10), rat_int(7)],
            vec![rat_int(2), rat_int(1)],
            vec![rat_int(5), rat_int(4)],
            rat_int(5),
        )
        .unwrap();
        let res = makespan_dp_exact(&inst).unwrap();
        assert_eq!(res.best_tested, ids(&[1]));
        assert_eq!(res.best_value, rat_int(9));
        let oracle = exact_solve(&inst, Objective::Makespan, DEFAULT_ORACLE_LIMIT).unwrap();
        assert_eq!(res.best_value, oracle.best_value);
    }

    #[test]
    fn dp_tests_everything_when_capacity_dominates() {
        let inst = Instance::offline(
            vec![rat_int(4), rat_int(6)],
            vec![rat_int(1), rat_int(2)],
            vec![rat_int(2), rat_int(3)],
            rat_int(100),
        )
        .unwrap();
        let res = makespan_dp_exact(&inst).unwrap();
        assert_eq!(res.best_tested, ids(&[1, 2]));
        assert_eq!(res.best_value, rat_int(3));
    }

    #[test]
    fn dp_skips_zero_gain_jobs() {
        let inst = Instance::offline(
            vec![rat_int(4), rat_int(6)],
            vec![rat_int(4), rat_int(6)],
            vec![rat_int(1), rat_int(1)],
            rat_int(2),
        )
        .unwrap();
        let res = makespan_dp_exact(&inst).unwrap();
        assert!(res.best_tested.is_empty());
        assert_eq!(res.best_value, rat_int(10));
    }

    #[test]
    fn dp_handles_rational_costs() {
        let inst = Instance::offline(
            vec![rat_int(9), rat_int(8)],
            vec![rat_int(0), rat_int(0)],
            vec![rat(3, 2), rat(5, 3)],
            rat(8, 3),
        )
        .unwrap();
        let res = makespan_dp_exact(&inst).unwrap();
        let oracle = exact_solve(&inst, Objective::Makespan, DEFAULT_ORACLE_LIMIT).unwrap();
        assert_eq!(res.best_value, oracle.best_value);
    }

    #[test]
    fn dp_agrees_with_oracle_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..60 {
            let n = rng.gen_range(1..=10);
            let inst = random_instance(&mut rng, n);
            let dp = makespan_dp_exact(&inst).unwrap();
            let oracle = exact_solve(&inst, Objective::Makespan, DEFAULT_ORACLE_LIMIT).unwrap();
            assert_eq!(dp.best_value, oracle.best_value, "instance {inst:?}");
        }
    }

    #[test]
    fn dp_agrees_with_oracle_on_rational_costs() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..30 {
            let n = rng.gen_range(1..=8);
            let p_up: Vec<i64> = (0..n).map(|_| rng.gen_range(0..=15)).collect();
            let p_low: Vec<i64> = p_up.iter().map(|&p| rng.gen_range(0..=p)).collect();
            let cost: Vec<Rational> = (0..n)
                .map(|_| rat(rng.gen_range(0..=12), rng.gen_range(1..=4)))
                .collect();
            let total = cost.iter().fold(Rational::zero(), |a, c| a + c);
            let budget = total * rat(rng.gen_range(0..=4), 4);
            let inst = Instance::offline(
                p_up.into_iter().map(rat_int).collect(),
                p_low.into_iter().map(rat_int).collect(),
                cost,
                budget,
            )
            .unwrap();
            let dp = makespan_dp_exact(&inst).unwrap();
            let oracle = exact_solve(&inst, Objective::Makespan, DEFAULT_ORACLE_LIMIT).unwrap();
            assert_eq!(dp.best_value, oracle.best_value, "instance {inst:?}");
        }
    }

    #[test]
    fn fptas_single_job_tests_iff_gain_positive() {
        for (low, expect_tested) in [(rat_int(2), true), (rat_int(5), false)] {
            let inst = Instance::offline(
                vec![rat_int(5)],
                vec![low],
                vec![rat_int(1)],
                rat_int(1),
            )
            .unwrap();
            let (tested, _) = makespan_fptas(&inst, &rat(1, 2)).unwrap();
            assert_eq!(!tested.is_empty(), expect_tested);
        }
    }

    #[test]
    fn fptas_close_to_exact_on_pair() {
        let inst = Instance::offline(
            vec![rat_int(10), rat_int(7)],
            vec![rat_int(2), rat_int(1)],
            vec![rat_int(5), rat_int(4)],
            rat_int(5),
        )
        .unwrap();
        let (_, value) = makespan_fptas(&inst, &rat(1, 10)).unwrap();
        assert!(value <= rat(99, 10));
        assert!(value >= rat_int(9));
    }

    #[test]
    fn fptas_within_bound_even_for_huge_epsilon() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let epsilon = rat_int(1000);
        for _ in 0..50 {
            let n = rng.gen_range(1..=12);
            let inst = random_instance(&mut rng, n);
            let (tested, value) = makespan_fptas(&inst, &epsilon).unwrap();
            let oracle = exact_solve(&inst, Objective::Makespan, DEFAULT_ORACLE_LIMIT).unwrap();
            assert!(value >= oracle.best_value);
            assert!(value <= (rat_int(1) + &epsilon) * &oracle.best_value);
            assert!(instance_feasible(&inst, &tested));
        }
    }

    fn instance_feasible(inst: &Instance, tested: &BTreeSet<JobId>) -> bool {
        inst.check_budget(tested).is_ok()
    }

    #[test]
    fn greedy_picks_largest_gain() {
        let inst = Instance::offline(
            vec![rat_int(4), rat_int(9), rat_int(6)],
            vec![rat_int(1), rat_int(2), rat_int(5)],
            vec![rat_int(1), rat_int(1), rat_int(1)],
            rat_int(1),
        )
        .unwrap();
        let (tested, value) = makespan_uniform_greedy(&inst, 1).unwrap();
        assert_eq!(tested, ids(&[2]));
        assert_eq!(value, rat_int(12));
        // Brute force over the three singletons.
        for j in 1..=3 {
            let single = ids(&[j]);
            let alt: Rational = inst
                .jobs()
                .map(|job| {
                    if single.contains(&job) {
                        inst.p_low(job).unwrap().clone()
                    } else {
                        inst.p_up(job).clone()
                    }
                })
                .fold(Rational::zero(), |a, b| a + b);
            assert!(value <= alt);
        }
    }

    #[test]
    fn greedy_extremes() {
        let inst = Instance::offline(
            vec![rat_int(4), rat_int(9)],
            vec![rat_int(1), rat_int(2)],
            vec![rat_int(1), rat_int(1)],
            rat_int(2),
        )
        .unwrap();
        let (tested, value) = makespan_uniform_greedy(&inst, 0).unwrap();
        assert!(tested.is_empty());
        assert_eq!(value, rat_int(13));
        let (tested, value) = makespan_uniform_greedy(&inst, 5).unwrap();
        assert_eq!(tested.len(), 2);
        assert_eq!(value, rat_int(3));
    }

    #[test]
    fn greedy_matches_oracle_on_unit_cost_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..40 {
            let n = rng.gen_range(1..=10);
            let p_up: Vec<i64> = (0..n).map(|_| rng.gen_range(0..=15)).collect();
            let p_low: Vec<i64> = p_up.iter().map(|&p| rng.gen_range(0..=p)).collect();
            let k = rng.gen_range(0..=n);
            let inst = Instance::offline(
                p_up.into_iter().map(rat_int).collect(),
                p_low.into_iter().map(rat_int).collect(),
                vec![rat_int(1); n],
                rat_int(k as i64),
            )
            .unwrap();
            let (_, value) = makespan_uniform_greedy(&inst, k).unwrap();
            let oracle = exact_solve(&inst, Objective::Makespan, DEFAULT_ORACLE_LIMIT).unwrap();
            assert_eq!(value, oracle.best_value);
        }
    }
}
