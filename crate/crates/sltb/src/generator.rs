//! Seeded random instance generation for the CLI and the benchmark harness.

use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::core::{rat_int, CoreError, Instance, Rational};

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("p_low fraction must lie in [0, 1]")]
    FractionOutOfRange,
    #[error("budget fraction must be nonnegative")]
    NegativeBudgetFraction,
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// Parameters of a random instance. Upper times and costs are uniform
/// integers; lower times are a fixed fraction of the upper time (`None`
/// leaves them hidden for oblivious experiments); the budget is a fraction
/// of the total testing cost.
#[derive(Clone, Debug)]
pub struct GeneratorSpec {
    pub n: usize,
    pub p_up_max: u64,
    pub p_low_fraction: Option<Rational>,
    pub cost_max: u64,
    pub budget_fraction: Rational,
    pub seed: u64,
}

/// Draws an instance; the seed fully determines the result.
pub fn generate(spec: &GeneratorSpec) -> Result<Instance, GeneratorError> {
    if let Some(f) = &spec.p_low_fraction {
        if f.is_negative() || f > &rat_int(1) {
            return Err(GeneratorError::FractionOutOfRange);
        }
    }
    if spec.budget_fraction.is_negative() {
        return Err(GeneratorError::NegativeBudgetFraction);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let p_up: Vec<Rational> = (0..spec.n)
        .map(|_| rat_int(rng.gen_range(0..=spec.p_up_max) as i64))
        .collect();
    let p_low: Vec<Option<Rational>> = p_up
        .iter()
        .map(|p| spec.p_low_fraction.as_ref().map(|f| f * p))
        .collect();
    let cost: Vec<Rational> = (0..spec.n)
        .map(|_| rat_int(rng.gen_range(0..=spec.cost_max) as i64))
        .collect();
    let total: Rational = cost.iter().fold(Rational::zero(), |a, c| a + c);
    let budget = &spec.budget_fraction * total;
    Ok(Instance::new(p_up, p_low, cost, budget)?)
}
