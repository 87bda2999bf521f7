//! Shared seeded instance builders for the integration suites.
#![allow(dead_code)] // each test binary uses its own subset

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sltb::core::{rat_int, Instance, Rational};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Offline instance with integer data: `p_low` uniform in `[0, p_up]`.
pub fn random_offline(rng: &mut ChaCha8Rng, n: usize, p_max: i64, c_max: i64) -> Instance {
    let p_up: Vec<i64> = (0..n).map(|_| rng.gen_range(0..=p_max)).collect();
    let p_low: Vec<i64> = p_up.iter().map(|&p| rng.gen_range(0..=p)).collect();
    let cost: Vec<i64> = (0..n).map(|_| rng.gen_range(0..=c_max)).collect();
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

/// Instance with every lower time zero and integer upper times and costs.
pub fn random_zero_lower(rng: &mut ChaCha8Rng, n: usize, p_max: i64, c_max: i64) -> Instance {
    let p_up: Vec<i64> = (0..n).map(|_| rng.gen_range(0..=p_max)).collect();
    let cost: Vec<i64> = (0..n).map(|_| rng.gen_range(0..=c_max)).collect();
    let total: i64 = cost.iter().sum();
    let budget = rng.gen_range(0..=total.max(1));
    Instance::offline(
        p_up.into_iter().map(rat_int).collect(),
        vec![Rational::zero(); n],
        cost.into_iter().map(rat_int).collect(),
        rat_int(budget),
    )
    .unwrap()
}

/// Oblivious view with integer upper times and costs; lower times hidden.
pub fn random_visible(rng: &mut ChaCha8Rng, n: usize, p_max: i64, c_max: i64) -> Instance {
    let p_up: Vec<i64> = (0..n).map(|_| rng.gen_range(0..=p_max)).collect();
    let cost: Vec<i64> = (0..n).map(|_| rng.gen_range(0..=c_max)).collect();
    let total: i64 = cost.iter().sum();
    let budget = rng.gen_range(0..=total.max(1));
    Instance::new(
        p_up.into_iter().map(rat_int).collect(),
        vec![None; n],
        cost.into_iter().map(rat_int).collect(),
        rat_int(budget),
    )
    .unwrap()
}
