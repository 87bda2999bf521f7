//! Hardness reductions as verified instance generators: Partition to
//! budgeted-testing TCT, and the two-way correspondence between knapsack and
//! budgeted-testing makespan.

use std::collections::BTreeSet;

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::core::{rat, rat_int, CoreError, Instance, JobId, Objective, Rational};
use crate::makespan::{KnapsackView, MakespanError};
use crate::oracle::{exact_solve, OracleError};

#[derive(Debug, Error)]
pub enum ReductionError {
    #[error("partition elements must be positive")]
    NonPositiveElement,
    #[error("element {element} exceeds half the total {half_total}")]
    ElementTooLarge { element: u64, half_total: Rational },
    #[error("empty input")]
    Empty,
    #[error("verification needs at most {limit} elements, got {got}")]
    TooLargeToVerify { got: usize, limit: usize },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Makespan(#[from] MakespanError),
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// The Partition-to-scheduling construction: two jobs per element, one
/// expensive-but-effective and one cheap, sized by back-to-front recursions
/// so that a budget-exact testing plan corresponds to a balanced partition.
///
/// Element `j` (1-based) yields jobs `2j-1` and `2j` with upper times
/// `a[j] + u[j]/j` and `a[j]`, costs `b[j] + u[j]` and `b[j]`, all lower
/// times zero. The budget is `sum b + half`, the target TCT is
/// `sum j*a[j] + half`.
#[derive(Clone, Debug)]
pub struct PartitionReduction {
    pub u: Vec<u64>,
    pub a: Vec<Rational>,
    pub b: Vec<Rational>,
    pub instance: Instance,
    pub target: Rational,
}

pub fn partition_to_sltb(u: &[u64]) -> Result<PartitionReduction, ReductionError> {
    if u.is_empty() {
        return Err(ReductionError::Empty);
    }
    if u.contains(&0) {
        return Err(ReductionError::NonPositiveElement);
    }
    let n = u.len();
    let total: u64 = u.iter().sum();
    let half = rat(total as i64, 2);
    for &x in u {
        if rat_int(x as i64) > half {
            return Err(ReductionError::ElementTooLarge {
                element: x,
                half_total: half,
            });
        }
    }

    // Back-to-front recursions; both sequences are strictly positive. The
    // spacing term must exceed the sum of any two elements or the generated
    // upper times fail to interleave pair by pair and non-partition testing
    // plans can reach the target, so it is the full element total plus one
    // rather than half of it.
    let spacing = rat_int(total as i64) + rat_int(1);
    let mut a = vec![Rational::zero(); n];
    let mut b = vec![Rational::zero(); n];
    let mut b_suffix = Rational::zero();
    let mut weighted_a_suffix = Rational::zero();
    for j in (0..n).rev() {
        b[j] = &b_suffix + &spacing;
        a[j] = (&weighted_a_suffix + &spacing - rat_int(u[j] as i64))
            / rat_int(j as i64 + 2);
        assert!(a[j].is_positive() && b[j].is_positive());
        b_suffix += &b[j];
        weighted_a_suffix += rat_int(j as i64 + 1) * &a[j];
    }

    let mut p_up = Vec::with_capacity(2 * n);
    let mut cost = Vec::with_capacity(2 * n);
    for j in 0..n {
        let element = rat_int(u[j] as i64);
        p_up.push(&a[j] + &element / rat_int(j as i64 + 1));
        p_up.push(a[j].clone());
        cost.push(&b[j] + &element);
        cost.push(b[j].clone());
    }
    let budget = &b_suffix + &half;
    let target = &weighted_a_suffix + &half;
    let instance = Instance::offline(p_up, vec![Rational::zero(); 2 * n], cost, budget)?;
    Ok(PartitionReduction {
        u: u.to_vec(),
        a,
        b,
        instance,
        target,
    })
}

impl PartitionReduction {
    /// Whether the generated upper times strictly interleave pair by pair
    /// (`p[2j-1] > p[2j] > p[2j+1] > ...`). The spacing term makes this hold
    /// for every admissible input; the equivalence argument relies on it.
    pub fn pair_ordering_holds(&self) -> bool {
        self.instance
            .jobs()
            .zip(self.instance.jobs().skip(1))
            .all(|(x, y)| self.instance.p_up(x) > self.instance.p_up(y))
    }

    /// Whether the element multiset splits into two halves of equal sum.
    /// Subset-sum table with predecessor recovery; pseudo-polynomial in the
    /// element total, so safe for any length.
    pub fn partition_exists(&self) -> Option<Vec<u64>> {
        let total: u64 = self.u.iter().sum();
        if !total.is_multiple_of(2) {
            return None;
        }
        let half = (total / 2) as usize;
        // reached[s] = index of the element that first reached sum s.
        let mut reached: Vec<Option<usize>> = vec![None; half + 1];
        reached[0] = Some(usize::MAX);
        for (idx, &element) in self.u.iter().enumerate() {
            let element = element as usize;
            for s in (element..=half).rev() {
                if reached[s].is_none() && reached[s - element].is_some() {
                    reached[s] = Some(idx);
                }
            }
        }
        reached[half]?;
        let mut subset = Vec::new();
        let mut s = half;
        while s > 0 {
            let idx = reached[s].expect("reached sums have predecessors");
            subset.push(self.u[idx]);
            s -= self.u[idx] as usize;
        }
        subset.reverse();
        Some(subset)
    }
}

/// Outcome of checking the reduction equivalence at oracle scale.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PartitionVerification {
    /// Partition-yes coincides with "oracle value at most target".
    Consistent { partition_yes: bool },
    /// A balanced subset exists but the oracle value exceeds the target.
    MissedPartition { subset: Vec<u64> },
    /// The oracle beats the target although no balanced subset exists.
    SpuriousSolution { tested: BTreeSet<JobId>, value: Rational },
}

/// Verification limit: the generated instance has twice as many jobs as
/// elements and goes through the subset-enumeration oracle.
pub const VERIFY_ELEMENT_LIMIT: usize = 6;

pub fn verify_partition_reduction(
    red: &PartitionReduction,
) -> Result<PartitionVerification, ReductionError> {
    if red.u.len() > VERIFY_ELEMENT_LIMIT {
        return Err(ReductionError::TooLargeToVerify {
            got: red.u.len(),
            limit: VERIFY_ELEMENT_LIMIT,
        });
    }
    let oracle = exact_solve(&red.instance, Objective::Tct, 2 * VERIFY_ELEMENT_LIMIT)?;
    let reaches_target = oracle.best_value <= red.target;
    match (red.partition_exists(), reaches_target) {
        (Some(_), true) | (None, false) => Ok(PartitionVerification::Consistent {
            partition_yes: reaches_target,
        }),
        (Some(subset), false) => Ok(PartitionVerification::MissedPartition { subset }),
        (None, true) => Ok(PartitionVerification::SpuriousSolution {
            tested: oracle.best_tested,
            value: oracle.best_value,
        }),
    }
}

/// Knapsack instance as a testing instance: item values become upper times
/// (lower times zero), weights become testing costs, the capacity becomes
/// the budget. Maximizing tested value minimizes the makespan.
pub fn knapsack_to_sltb(
    values: &[Rational],
    weights: &[Rational],
    capacity: &Rational,
) -> Result<Instance, ReductionError> {
    if values.len() != weights.len() {
        return Err(ReductionError::Core(CoreError::InvalidInstance(format!(
            "{} values for {} weights",
            values.len(),
            weights.len()
        ))));
    }
    Ok(Instance::offline(
        values.to_vec(),
        vec![Rational::zero(); values.len()],
        weights.to_vec(),
        capacity.clone(),
    )?)
}

/// The reverse view: profits are the testing gains `p_up - p_low`, weights
/// the costs, capacity the budget.
pub fn sltb_to_knapsack(instance: &Instance) -> Result<KnapsackView, ReductionError> {
    Ok(KnapsackView::from_instance(instance)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::makespan::makespan_dp_exact;
    use crate::oracle::DEFAULT_ORACLE_LIMIT;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_element_construction_matches_hand_computation() {
        // Spacing 2+2+1 = 5: b = (10, 5), a_2 = (5-2)/3 = 1,
        // a_1 = (2*1 + 5 - 2)/2 = 5/2; budget 15 + 2, target 5/2 + 2*1 + 2.
        let red = partition_to_sltb(&[2, 2]).unwrap();
        assert_eq!(red.a, vec![rat(5, 2), rat_int(1)]);
        assert_eq!(red.b, vec![rat_int(10), rat_int(5)]);
        assert_eq!(red.instance.budget(), &rat_int(17));
        assert_eq!(red.target, rat(13, 2));
        assert_eq!(red.instance.n(), 4);
        assert_eq!(red.instance.p_up(JobId(0)), &rat(9, 2));
        assert_eq!(red.instance.p_up(JobId(1)), &rat(5, 2));
        assert_eq!(red.instance.cost(JobId(0)), &rat_int(12));
        assert_eq!(red.instance.cost(JobId(3)), &rat_int(5));
    }

    #[test]
    fn yes_instance_oracle_value_hits_the_target() {
        // Exactly-one-per-pair plans with a balanced element subset spend
        // the whole budget and land on the target; nothing beats it.
        let red = partition_to_sltb(&[2, 2]).unwrap();
        let oracle =
            exact_solve(&red.instance, Objective::Tct, DEFAULT_ORACLE_LIMIT).unwrap();
        assert_eq!(oracle.best_value, red.target);
    }

    #[test]
    fn symmetric_pairs_share_budget_structure() {
        for k in [1u64, 3, 7] {
            let red = partition_to_sltb(&[k, k]).unwrap();
            let expected_budget = &red.b[0] + &red.b[1] + rat_int(k as i64);
            assert_eq!(red.instance.budget(), &expected_budget);
        }
    }

    #[test]
    fn oversized_elements_are_rejected() {
        assert!(matches!(
            partition_to_sltb(&[1, 5]),
            Err(ReductionError::ElementTooLarge { element: 5, .. })
        ));
        assert!(matches!(partition_to_sltb(&[]), Err(ReductionError::Empty)));
        assert!(matches!(
            partition_to_sltb(&[0, 1]),
            Err(ReductionError::NonPositiveElement)
        ));
    }

    #[test]
    fn recursion_values_stay_positive() {
        for u in [vec![1, 1, 1, 1], vec![4, 4, 4, 4], vec![2, 3, 5], vec![8, 8, 8, 8, 8]] {
            let red = partition_to_sltb(&u).unwrap();
            assert!(red.a.iter().all(|x| x.is_positive()));
            assert!(red.b.iter().all(|x| x.is_positive()));
        }
    }

    #[test]
    fn pair_ordering_always_holds() {
        for u in [
            vec![1, 1, 1, 1],
            vec![2, 2],
            vec![1, 3, 3],
            vec![8, 8, 8, 8, 8],
            vec![2, 3, 5],
        ] {
            let red = partition_to_sltb(&u).unwrap();
            assert!(red.pair_ordering_holds(), "ordering broke for {u:?}");
        }
    }

    #[test]
    fn verifier_agrees_on_small_families() {
        // Yes-instances reach the target; the odd-total family does not.
        let yes = partition_to_sltb(&[2, 2]).unwrap();
        assert_eq!(
            verify_partition_reduction(&yes).unwrap(),
            PartitionVerification::Consistent {
                partition_yes: true
            }
        );
        let yes3 = partition_to_sltb(&[2, 2, 4]).unwrap();
        assert_eq!(
            verify_partition_reduction(&yes3).unwrap(),
            PartitionVerification::Consistent {
                partition_yes: true
            }
        );
        let no = partition_to_sltb(&[2, 2, 2]).unwrap();
        assert_eq!(
            verify_partition_reduction(&no).unwrap(),
            PartitionVerification::Consistent {
                partition_yes: false
            }
        );
    }

    #[test]
    fn verifier_guards_size() {
        let red = partition_to_sltb(&[4; 7]).unwrap();
        assert!(matches!(
            verify_partition_reduction(&red),
            Err(ReductionError::TooLargeToVerify { got: 7, .. })
        ));
    }

    #[test]
    fn knapsack_round_trip_and_optima() {
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        for _ in 0..40 {
            let n = rng.gen_range(1..=10);
            let values: Vec<Rational> = (0..n).map(|_| rat_int(rng.gen_range(0..=12))).collect();
            let weights: Vec<Rational> = (0..n).map(|_| rat_int(rng.gen_range(0..=8))).collect();
            let capacity = rat_int(rng.gen_range(0..=30));
            let inst = knapsack_to_sltb(&values, &weights, &capacity).unwrap();
            let view = sltb_to_knapsack(&inst).unwrap();
            assert_eq!(view.values, values);
            assert_eq!(view.weights, weights);
            assert_eq!(view.capacity, capacity);

            // Optimal selections correspond: brute-force knapsack profit
            // equals total value minus optimal makespan.
            let mut best_profit = Rational::zero();
            for mask in 0u32..(1 << n) {
                let mut weight = Rational::zero();
                let mut profit = Rational::zero();
                for k in 0..n {
                    if mask & (1 << k) != 0 {
                        weight += &weights[k];
                        profit += &values[k];
                    }
                }
                if weight <= capacity && profit > best_profit {
                    best_profit = profit;
                }
            }
            let oracle = exact_solve(&inst, Objective::Makespan, DEFAULT_ORACLE_LIMIT).unwrap();
            let total: Rational = values.iter().fold(Rational::zero(), |a, v| a + v);
            assert_eq!(&total - &oracle.best_value, best_profit);
            let dp = makespan_dp_exact(&inst).unwrap();
            assert_eq!(dp.best_value, oracle.best_value);
        }
    }

    #[test]
    fn knapsack_identity_over_tested_sets() {
        let values = vec![rat_int(8), rat_int(6)];
        let weights = vec![rat_int(5), rat_int(4)];
        let inst = knapsack_to_sltb(&values, &weights, &rat_int(5)).unwrap();
        let oracle = exact_solve(&inst, Objective::Makespan, DEFAULT_ORACLE_LIMIT).unwrap();
        assert_eq!(oracle.best_tested, BTreeSet::from([JobId(0)]));
        let view = sltb_to_knapsack(&inst).unwrap();
        for mask in 0u32..4 {
            let tested: BTreeSet<JobId> =
                (0..2).filter(|k| mask & (1 << k) != 0).map(JobId).collect();
            if inst.check_budget(&tested).is_err() {
                continue;
            }
            let makespan = crate::core::makespan_value(&inst, &tested).unwrap();
            let total = rat_int(14);
            assert_eq!(makespan, total - view.profit(&tested));
        }
    }
}
