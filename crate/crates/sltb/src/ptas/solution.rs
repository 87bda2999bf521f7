//! Fractional assignments of jobs to reverse positions and test states, with
//! cached objective cost and budget use.

use std::collections::BTreeSet;

use num_traits::Zero;

use crate::core::{rat_int, Instance, JobId, Rational, Schedule, TestState};

use super::{Fixation, PtasError};

/// Variable identifier: job, reverse position (1-based), test state. The
/// derived ordering is the lexicographic order used for deterministic walks
/// and tie-breaks.
pub type VarKey = (JobId, usize, TestState);

/// A solution to the relaxed assignment LP: a value in `[0, 1]` per
/// variable, with the objective cost `sum i * p^t_j * x` and the budget use
/// `sum c_j * x_(j,i,tested)` kept incrementally.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LpSolution {
    n: usize,
    values: Vec<Rational>,
    cost: Rational,
    budget_use: Rational,
}

impl LpSolution {
    fn index(n: usize, key: VarKey) -> usize {
        let (j, i, t) = key;
        debug_assert!(j.0 < n && (1..=n).contains(&i));
        (j.0 * n + (i - 1)) * 2 + t as usize
    }

    /// Variable order matching the index layout: lexicographic in
    /// `(job, position, state)`.
    pub fn var_order(n: usize) -> impl Iterator<Item = VarKey> {
        (0..n).flat_map(move |j| {
            (1..=n).flat_map(move |i| {
                [TestState::Untested, TestState::Tested]
                    .into_iter()
                    .map(move |t| (JobId(j), i, t))
            })
        })
    }

    /// Wraps raw values in variable order, computing both caches.
    pub fn from_values(instance: &Instance, values: Vec<Rational>) -> Result<LpSolution, PtasError> {
        let n = instance.n();
        if values.len() != 2 * n * n {
            return Err(PtasError::InvariantViolation(format!(
                "expected {} variable values, got {}",
                2 * n * n,
                values.len()
            )));
        }
        let mut solution = LpSolution {
            n,
            values,
            cost: Rational::zero(),
            budget_use: Rational::zero(),
        };
        solution.cost = solution.recompute_cost(instance)?;
        solution.budget_use = solution.recompute_budget_use(instance);
        Ok(solution)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, key: VarKey) -> &Rational {
        &self.values[LpSolution::index(self.n, key)]
    }

    /// Contribution weight of a variable: reverse position times realized
    /// processing time.
    pub fn weight(instance: &Instance, key: VarKey) -> Result<Rational, PtasError> {
        let (j, i, t) = key;
        let p = instance.realized(j, t)?;
        Ok(rat_int(i as i64) * p)
    }

    /// Sets a variable, updating both caches.
    pub fn set(&mut self, instance: &Instance, key: VarKey, value: Rational) -> Result<(), PtasError> {
        let idx = LpSolution::index(self.n, key);
        let delta = &value - &self.values[idx];
        if delta.is_zero() {
            return Ok(());
        }
        self.cost += LpSolution::weight(instance, key)? * &delta;
        if key.2 == TestState::Tested {
            self.budget_use += instance.cost(key.0) * &delta;
        }
        self.values[idx] = value;
        Ok(())
    }

    pub fn cost(&self) -> &Rational {
        &self.cost
    }

    pub fn budget_use(&self) -> &Rational {
        &self.budget_use
    }

    pub fn recompute_cost(&self, instance: &Instance) -> Result<Rational, PtasError> {
        let mut total = Rational::zero();
        for key in LpSolution::var_order(self.n) {
            let v = self.get(key);
            if !v.is_zero() {
                total += LpSolution::weight(instance, key)? * v;
            }
        }
        Ok(total)
    }

    pub fn recompute_budget_use(&self, instance: &Instance) -> Rational {
        let mut total = Rational::zero();
        for key in LpSolution::var_order(self.n) {
            if key.2 == TestState::Tested {
                let v = self.get(key);
                if !v.is_zero() {
                    total += instance.cost(key.0) * v;
                }
            }
        }
        total
    }

    /// Strictly fractional variables in lexicographic order.
    pub fn fractional_vars(&self) -> Vec<VarKey> {
        LpSolution::var_order(self.n)
            .filter(|&key| {
                let v = self.get(key);
                !v.is_zero() && !v.is_integer()
            })
            .collect()
    }

    pub fn is_integral(&self) -> bool {
        self.values.iter().all(|v| v.is_integer())
    }

    /// Total scheduled mass at a reverse position.
    pub fn position_load(&self, i: usize) -> Rational {
        let mut total = Rational::zero();
        for j in 0..self.n {
            for t in [TestState::Untested, TestState::Tested] {
                total += self.get((JobId(j), i, t));
            }
        }
        total
    }

    pub fn job_load(&self, j: JobId) -> Rational {
        let mut total = Rational::zero();
        for i in 1..=self.n {
            for t in [TestState::Untested, TestState::Tested] {
                total += self.get((j, i, t));
            }
        }
        total
    }

    /// Checks every constraint of the relaxed LP for the fixation, plus
    /// cache consistency. Exact rational checks throughout.
    pub fn check_valid(&self, instance: &Instance, fixation: &Fixation) -> Result<(), PtasError> {
        let one = rat_int(1);
        let two = rat_int(2);
        for key in LpSolution::var_order(self.n) {
            let v = self.get(key);
            if v < &Rational::zero() || v > &one {
                return Err(PtasError::InvariantViolation(format!(
                    "variable {key:?} = {v} outside [0, 1]"
                )));
            }
        }
        for i in 1..=self.n {
            let load = self.position_load(i);
            if fixation.crowded.contains(&i) {
                if load < Rational::zero() || load > two {
                    return Err(PtasError::InvariantViolation(format!(
                        "crowded position {i} has load {load}"
                    )));
                }
            } else if load != one {
                return Err(PtasError::InvariantViolation(format!(
                    "position {i} has load {load}"
                )));
            }
        }
        for j in instance.jobs() {
            if self.job_load(j) != one {
                return Err(PtasError::InvariantViolation(format!(
                    "job {j} has load {}",
                    self.job_load(j)
                )));
            }
        }
        if &self.budget_use > instance.budget() {
            return Err(PtasError::InvariantViolation(format!(
                "budget use {} exceeds {}",
                self.budget_use,
                instance.budget()
            )));
        }
        for &key in &fixation.fixed_vars {
            if self.get(key) != &one {
                return Err(PtasError::InvariantViolation(format!(
                    "fixed variable {key:?} is {}",
                    self.get(key)
                )));
            }
        }
        for &j in &fixation.tested_jobs {
            let mut tested_mass = Rational::zero();
            for i in 1..=self.n {
                tested_mass += self.get((j, i, TestState::Tested));
            }
            if tested_mass != one {
                return Err(PtasError::InvariantViolation(format!(
                    "tested job {j} has tested mass {tested_mass}"
                )));
            }
        }
        if self.recompute_cost(instance)? != self.cost {
            return Err(PtasError::InvariantViolation("cost cache drifted".into()));
        }
        if self.recompute_budget_use(instance) != self.budget_use {
            return Err(PtasError::InvariantViolation(
                "budget-use cache drifted".into(),
            ));
        }
        Ok(())
    }

    /// Occupancy per reverse position of an integral solution: the jobs
    /// scheduled there with their states, sorted by job id.
    pub fn occupancy(&self) -> Result<Vec<Vec<(JobId, TestState)>>, PtasError> {
        if !self.is_integral() {
            return Err(PtasError::InvariantViolation(
                "occupancy of a fractional solution".into(),
            ));
        }
        let mut occ: Vec<Vec<(JobId, TestState)>> = vec![Vec::new(); self.n + 1];
        for key in LpSolution::var_order(self.n) {
            if self.get(key).is_integer() && !self.get(key).is_zero() {
                occ[key.1].push((key.0, key.2));
            }
        }
        Ok(occ)
    }

    /// Converts a one-job-per-position integral solution into a schedule
    /// (reverse position `i` is forward position `n - i + 1`).
    pub fn to_schedule(&self, instance: &Instance) -> Result<Schedule, PtasError> {
        let occ = self.occupancy()?;
        let n = self.n;
        let mut order: Vec<Option<JobId>> = vec![None; n];
        let mut tested = BTreeSet::new();
        for (i, slot) in occ.iter().enumerate().skip(1) {
            match slot.as_slice() {
                [(job, state)] => {
                    order[n - i] = Some(*job);
                    if *state == TestState::Tested {
                        tested.insert(*job);
                    }
                }
                [] => {
                    return Err(PtasError::InvariantViolation(format!(
                        "position {i} is empty"
                    )))
                }
                _ => {
                    return Err(PtasError::InvariantViolation(format!(
                        "position {i} schedules {} jobs",
                        slot.len()
                    )))
                }
            }
        }
        let order: Vec<JobId> = order
            .into_iter()
            .map(|j| j.ok_or_else(|| PtasError::InvariantViolation("vacant slot".into())))
            .collect::<Result<_, _>>()?;
        let schedule = Schedule::new(order, tested);
        schedule.validate(instance)?;
        Ok(schedule)
    }
}
