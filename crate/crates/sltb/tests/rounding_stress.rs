//! Stress tests for the rounding pipeline on adversarial fractional
//! solutions. Convex combinations of random integral schedules satisfy all
//! position and job constraints while producing dense fractional structures
//! (overlapping cycles, theta graphs) that LP vertices rarely exhibit.

mod common;

use std::collections::BTreeSet;

use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::Rng;
use sltb::core::{rat, rat_int, Instance, Rational, TestState};
use sltb::ptas::{
    decrowd, eliminate_cycles, repeated_cut, Fixation, LpSolution, VarKey,
};
use sltb::JobId;

/// Mixes `k` random one-job-per-position assignments with random type
/// choices into one fractional solution, then sets the budget to the exact
/// budget use so the solution is valid for the empty fixation.
fn mixed_solution(rng: &mut rand_chacha::ChaCha8Rng, n: usize, k: usize) -> (Instance, LpSolution) {
    let p_up: Vec<i64> = (0..n).map(|_| rng.gen_range(0..=9)).collect();
    let p_low: Vec<i64> = p_up.iter().map(|&p| rng.gen_range(0..=p)).collect();
    let cost: Vec<i64> = (0..n).map(|_| rng.gen_range(0..=5)).collect();

    // Random convex weights k/denominator.
    let denominator = 2 * k as i64;
    let mut weights: Vec<Rational> = (0..k).map(|_| rat(1, denominator)).collect();
    let leftover = rat_int(1)
        - weights
            .iter()
            .fold(Rational::zero(), |a, w| a + w);
    weights[0] += leftover;

    let mut values = vec![Rational::zero(); 2 * n * n];
    let index = |key: VarKey| (key.0 .0 * n + (key.1 - 1)) * 2 + key.2 as usize;
    for weight in &weights {
        let mut positions: Vec<usize> = (1..=n).collect();
        positions.shuffle(rng);
        for (job, &pos) in positions.iter().enumerate() {
            let state = if rng.gen_bool(0.5) {
                TestState::Tested
            } else {
                TestState::Untested
            };
            values[index((JobId(job), pos, state))] += weight;
        }
    }

    // Budget exactly covers the mixture's budget use.
    let mut budget = Rational::zero();
    for job in 0..n {
        for pos in 1..=n {
            let v = &values[index((JobId(job), pos, TestState::Tested))];
            if !v.is_zero() {
                budget += rat_int(cost[job]) * v;
            }
        }
    }
    let instance = Instance::offline(
        p_up.into_iter().map(rat_int).collect(),
        p_low.into_iter().map(rat_int).collect(),
        cost.into_iter().map(rat_int).collect(),
        budget,
    )
    .unwrap();
    let x = LpSolution::from_values(&instance, values).unwrap();
    (instance, x)
}

#[test]
fn cycle_elimination_rounds_dense_fractional_mixtures() {
    let mut rng = common::rng(777);
    let fixation = Fixation::empty();
    let mut blocked = 0usize;
    for _ in 0..150 {
        let n = rng.gen_range(2..=7);
        let k = rng.gen_range(2..=4);
        let (instance, x) = mixed_solution(&mut rng, n, k);
        x.check_valid(&instance, &fixation).unwrap();
        let before_budget = x.budget_use().clone();
        let before_cost = x.cost().clone();

        let (out, blocking) = eliminate_cycles(x, &instance, &fixation).unwrap();
        assert_eq!(out.budget_use(), &before_budget);
        assert!(out.cost() <= &before_cost);
        match blocking {
            None => assert!(out.is_integral()),
            Some(cycle) => {
                blocked += 1;
                assert!(cycle.is_cycle());
                assert!(cycle.alternating_value(&out).is_some());
                assert!(!cycle.budget_rate(&instance).is_zero());
                let fractional: BTreeSet<VarKey> =
                    out.fractional_vars().into_iter().collect();
                assert_eq!(cycle.var_set(), fractional);
            }
        }
    }
    // The mixture construction should hit both exits.
    assert!(blocked > 0, "no run ended with a blocking cycle");
}

#[test]
fn repeated_cut_finishes_what_cycle_elimination_starts() {
    let mut rng = common::rng(779);
    let fixation = Fixation::empty();
    let mut rounded = 0usize;
    for _ in 0..150 {
        let n = rng.gen_range(2..=7);
        let k = rng.gen_range(2..=4);
        let (instance, x) = mixed_solution(&mut rng, n, k);
        let budget_cap = instance.budget().clone();
        let (x, blocking) = eliminate_cycles(x, &instance, &fixation).unwrap();
        let Some(cycle) = blocking else { continue };
        rounded += 1;

        let result = repeated_cut(x, cycle, 1, &instance, &fixation).unwrap();
        assert!(result.solution.is_integral());
        assert!(result.solution.budget_use() <= &budget_cap);
        let relaxed = fixation.with_crowded(result.crowded.clone());
        if let Some(job) = result.ejected {
            // The rescheduled job sits untested somewhere; the full pipeline
            // would relocate it. Here only the relaxed validity of the rest
            // is checked after removing it.
            let mut stripped = result.solution.clone();
            for pos in 1..=n {
                for state in [TestState::Untested, TestState::Tested] {
                    stripped
                        .set(&instance, (job, pos, state), Rational::zero())
                        .unwrap();
                }
            }
            for other in instance.jobs().filter(|&j| j != job) {
                assert_eq!(stripped.job_load(other), rat_int(1));
            }
        } else {
            result.solution.check_valid(&instance, &relaxed).unwrap();
            // Decrowding turns it into a one-job-per-position solution.
            let (flat, _moves) = decrowd(&result.solution, &instance, &result.crowded).unwrap();
            let schedule = flat.to_schedule(&instance).unwrap();
            schedule.validate(&instance).unwrap();
        }
    }
    assert!(rounded > 0, "no blocking cycles reached the repeated cut");
}
