//! Brute-force exact solver. It enumerates every budget-feasible tested set
//! and serves as ground truth for all approximation algorithms and for the
//! reduction verifiers.

use std::collections::BTreeSet;

use num_traits::Zero;
use thiserror::Error;

use crate::core::{objective_value, CoreError, Instance, JobId, Objective, Rational};

/// Default cap on the instance size accepted by [`exact_solve`]; subset
/// enumeration is 2^n.
pub const DEFAULT_ORACLE_LIMIT: usize = 22;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("instance has {n} jobs, above the oracle limit {limit}")]
    InstanceTooLarge { n: usize, limit: usize },
    #[error("oracle needs every lower processing time")]
    MissingLowerTimes,
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// Result of an exact solve: the best tested set, its objective value and how
/// many subsets were examined (zero for solvers that do not enumerate).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleResult {
    pub best_tested: BTreeSet<JobId>,
    pub best_value: Rational,
    pub objective: Objective,
    pub subsets_examined: u64,
}

/// Enumerates all budget-feasible tested subsets, evaluates each via the SPT
/// schedule, and returns the minimum. Ties are broken by the lexicographically
/// smallest tested set (as a sorted id sequence), so the empty set wins over
/// any other optimum.
pub fn exact_solve(
    instance: &Instance,
    objective: Objective,
    limit_n: usize,
) -> Result<OracleResult, OracleError> {
    let n = instance.n();
    // The mask arithmetic needs n below the word size regardless of the
    // caller's limit.
    if n > limit_n.min(usize::BITS as usize - 2) {
        return Err(OracleError::InstanceTooLarge { n, limit: limit_n });
    }
    if !instance.has_all_lower() {
        return Err(OracleError::MissingLowerTimes);
    }

    let mut best_tested = BTreeSet::new();
    let mut best_value = objective_value(instance, &best_tested, objective)?;
    let mut examined = 1u64;

    // Plain binary counter over subsets with incremental cost tracking.
    // Incrementing `mask` clears the bits below its new lowest bit, so the
    // running cost is updated with one prefix-sum subtraction and one add.
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(Rational::zero());
    for j in instance.jobs() {
        let last = prefix.last().unwrap().clone();
        prefix.push(last + instance.cost(j));
    }
    let mut running = Rational::zero();
    for mask in 1usize..(1usize << n) {
        let low_bit = mask.trailing_zeros() as usize;
        running = running - &prefix[low_bit] + instance.cost(JobId(low_bit));
        if &running > instance.budget() {
            continue;
        }
        let tested: BTreeSet<JobId> = (0..n).filter(|b| mask & (1 << b) != 0).map(JobId).collect();
        let value = objective_value(instance, &tested, objective)?;
        examined += 1;
        if value < best_value || (value == best_value && lex_smaller(&tested, &best_tested)) {
            best_value = value;
            best_tested = tested;
        }
    }

    Ok(OracleResult {
        best_tested,
        best_value,
        objective,
        subsets_examined: examined,
    })
}

/// Lexicographic order on sorted id sequences. The empty sequence is the
/// smallest; a strict prefix precedes its extensions.
fn lex_smaller(a: &BTreeSet<JobId>, b: &BTreeSet<JobId>) -> bool {
    a.iter().lt(b.iter())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{rat_int, Rational};

    fn ids(one_based: &[usize]) -> BTreeSet<JobId> {
        one_based.iter().map(|&k| JobId::from_one_based(k)).collect()
    }

    #[test]
    fn two_jobs_tct() {
        let inst = Instance::offline(
            vec![rat_int(3), rat_int(2)],
            vec![Rational::zero(), Rational::zero()],
            vec![rat_int(1), rat_int(1)],
            rat_int(1),
        )
        .unwrap();
        let res = exact_solve(&inst, Objective::Tct, DEFAULT_ORACLE_LIMIT).unwrap();
        assert_eq!(res.best_tested, ids(&[1]));
        assert_eq!(res.best_value, rat_int(2));
    }

    #[test]
    fn zero_budget_keeps_everything_untested() {
        let inst = Instance::offline(
            vec![rat_int(4), rat_int(1)],
            vec![Rational::zero(), Rational::zero()],
            vec![rat_int(1), rat_int(1)],
            rat_int(0),
        )
        .unwrap();
        let res = exact_solve(&inst, Objective::Tct, DEFAULT_ORACLE_LIMIT).unwrap();
        assert!(res.best_tested.is_empty());
        assert_eq!(
            res.best_value,
            crate::core::spt_value(&inst, &BTreeSet::new()).unwrap()
        );
    }

    #[test]
    fn hard_instance_value_at_n4() {
        // Four unit jobs, unit costs, budget 2, lower times zero: the optimum
        // tests two jobs and achieves n(n+2)/8 = 3.
        let inst = Instance::offline(
            vec![rat_int(1); 4],
            vec![Rational::zero(); 4],
            vec![rat_int(1); 4],
            rat_int(2),
        )
        .unwrap();
        let res = exact_solve(&inst, Objective::Tct, DEFAULT_ORACLE_LIMIT).unwrap();
        assert_eq!(res.best_value, rat_int(3));
        assert_eq!(res.best_tested.len(), 2);
        // Lexicographic tie-break picks the two smallest ids.
        assert_eq!(res.best_tested, ids(&[1, 2]));
    }

    #[test]
    fn size_guard() {
        let inst = Instance::offline(
            vec![rat_int(1); 5],
            vec![Rational::zero(); 5],
            vec![rat_int(1); 5],
            rat_int(1),
        )
        .unwrap();
        assert!(matches!(
            exact_solve(&inst, Objective::Tct, 4),
            Err(OracleError::InstanceTooLarge { n: 5, limit: 4 })
        ));
    }

    #[test]
    fn missing_lower_times_rejected() {
        let inst = Instance::new(
            vec![rat_int(1), rat_int(2)],
            vec![Some(Rational::zero()), None],
            vec![rat_int(1), rat_int(1)],
            rat_int(1),
        )
        .unwrap();
        assert!(matches!(
            exact_solve(&inst, Objective::Tct, DEFAULT_ORACLE_LIMIT),
            Err(OracleError::MissingLowerTimes)
        ));
    }

    #[test]
    fn monotone_in_budget_and_dominance() {
        // A fixed small instance checked across growing budgets and lowered
        // p_low values.
        let p_up = vec![rat_int(5), rat_int(3), rat_int(4)];
        let cost = vec![rat_int(2), rat_int(1), rat_int(3)];
        let mut prev: Option<Rational> = None;
        for budget in 0..=6 {
            let inst = Instance::offline(
                p_up.clone(),
                vec![rat_int(1), rat_int(2), rat_int(0)],
                cost.clone(),
                rat_int(budget),
            )
            .unwrap();
            let res = exact_solve(&inst, Objective::Tct, DEFAULT_ORACLE_LIMIT).unwrap();
            if let Some(prev) = prev {
                assert!(res.best_value <= prev);
            }
            prev = Some(res.best_value);
        }

        let base = Instance::offline(
            p_up.clone(),
            vec![rat_int(1), rat_int(2), rat_int(0)],
            cost.clone(),
            rat_int(3),
        )
        .unwrap();
        let lowered = Instance::offline(
            p_up,
            vec![rat_int(0), rat_int(2), rat_int(0)],
            cost,
            rat_int(3),
        )
        .unwrap();
        let v_base = exact_solve(&base, Objective::Tct, 22).unwrap().best_value;
        let v_low = exact_solve(&lowered, Objective::Tct, 22).unwrap().best_value;
        assert!(v_low <= v_base);
    }

    #[test]
    fn agreement_when_lower_equals_upper() {
        let inst = Instance::offline(
            vec![rat_int(2), rat_int(5)],
            vec![rat_int(2), rat_int(5)],
            vec![rat_int(1), rat_int(1)],
            rat_int(2),
        )
        .unwrap();
        let res = exact_solve(&inst, Objective::Tct, 22).unwrap();
        assert_eq!(
            res.best_value,
            crate::core::spt_value(&inst, &BTreeSet::new()).unwrap()
        );
        assert!(res.best_tested.is_empty());
    }
}
