//! Oblivious setting: the lower processing times are hidden. The strategy
//! solves the auxiliary instance whose lower times are all zero and tests
//! whatever that solution tests; adversaries then reveal lower times and a
//! simulator measures the competitive ratio against the full-knowledge
//! optimum.

use std::collections::BTreeSet;

use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::core::{
    objective_value, rational_to_string, CoreError, Instance, JobId, Objective, Rational,
};
use crate::makespan::{makespan_fptas, MakespanError};
use crate::oracle::{exact_solve, OracleError};
use crate::tct_dp::{tct_dp_exact, tct_fptas, TctDpError};

#[derive(Debug, Error)]
pub enum ObliviousError {
    #[error("epsilon must be positive")]
    NonPositiveEpsilon,
    #[error("hard instances need an even number of jobs, got {0}")]
    OddJobCount(usize),
    #[error("hidden vector has {got} entries for {expected} jobs")]
    HiddenLengthMismatch { got: usize, expected: usize },
    #[error("instance too large for the oracle ({n} jobs) and FPTAS fallback not requested")]
    OracleTooLarge { n: usize },
    #[error(transparent)]
    Tct(#[from] TctDpError),
    #[error(transparent)]
    Makespan(#[from] MakespanError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// An instance as the oblivious algorithm sees it: no lower processing
/// times. Operations in this module never read them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VisibleInstance(Instance);

impl VisibleInstance {
    /// Strips whatever lower times the instance carries.
    pub fn new(instance: &Instance) -> VisibleInstance {
        VisibleInstance(instance.hide_lower())
    }

    pub fn as_instance(&self) -> &Instance {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.n()
    }

    /// The auxiliary instance: identical except every lower time is zero.
    pub fn auxiliary(&self) -> Instance {
        self.0.with_zero_lower()
    }

    /// Reveals a full lower-time vector, producing an offline instance.
    pub fn reveal(&self, p_low: Vec<Rational>) -> Result<Instance, ObliviousError> {
        if p_low.len() != self.n() {
            return Err(ObliviousError::HiddenLengthMismatch {
                got: p_low.len(),
                expected: self.n(),
            });
        }
        Ok(self.0.with_lower(p_low)?)
    }
}

/// How the hidden lower times are chosen in a simulation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Adversary {
    /// Tested jobs keep their upper time, everything else drops to zero; the
    /// structure of the worst-case instance.
    WorstCase,
    /// A fixed hidden vector supplied by the caller.
    FixedVector,
}

/// How the simulator computes the full-knowledge optimum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptMode {
    Oracle { limit_n: usize },
    Fptas,
}

/// One simulated run: the algorithm's tested set and value, the optimum, and
/// their ratio (undefined when the optimum is zero).
#[derive(Clone, Debug, Serialize)]
pub struct SimulationReport {
    pub objective: Objective,
    pub adversary: Adversary,
    pub alg_tested: Vec<usize>,
    pub alg_value: String,
    pub opt_tested: Vec<usize>,
    pub opt_value: String,
    pub ratio: Option<String>,
    #[serde(skip)]
    pub alg_value_exact: Rational,
    #[serde(skip)]
    pub opt_value_exact: Rational,
    #[serde(skip)]
    pub ratio_exact: Option<Rational>,
}

/// Chooses a tested set from the visible data alone by solving the
/// auxiliary instance: exactly via the DP when the upper times are small
/// integers, otherwise via the `(1 + epsilon)` FPTAS.
pub fn oblivious_choose(
    visible: &VisibleInstance,
    objective: Objective,
    epsilon: &Rational,
) -> Result<BTreeSet<JobId>, ObliviousError> {
    if !epsilon.is_positive() {
        return Err(ObliviousError::NonPositiveEpsilon);
    }
    let aux = visible.auxiliary();
    match objective {
        Objective::Tct => {
            if tct_dp_is_cheap(&aux) {
                Ok(tct_dp_exact(&aux)?.best_tested)
            } else {
                Ok(tct_fptas(&aux, epsilon)?.0)
            }
        }
        Objective::Makespan => Ok(makespan_fptas(&aux, epsilon)?.0),
    }
}

/// The exact DP is preferred when the upper times are integers and the
/// completion-time dimension stays desk-sized.
fn tct_dp_is_cheap(aux: &Instance) -> bool {
    let n = aux.n() as u64;
    let mut max_p = 0u64;
    for j in aux.jobs() {
        let p = aux.p_up(j);
        if !p.is_integer() {
            return false;
        }
        match p.to_integer().to_u64() {
            Some(v) => max_p = max_p.max(v),
            None => return false,
        }
    }
    n * n * max_p <= 50_000
}

/// Worst-case reveal for a given tested set: tested jobs keep their upper
/// time (testing gains nothing), all other jobs drop to zero.
pub fn adversary_worst_case(
    visible: &VisibleInstance,
    alg_tested: &BTreeSet<JobId>,
) -> Result<Instance, ObliviousError> {
    let p_low = visible
        .as_instance()
        .jobs()
        .map(|j| {
            if alg_tested.contains(&j) {
                visible.as_instance().p_up(j).clone()
            } else {
                Rational::zero()
            }
        })
        .collect();
    visible.reveal(p_low)
}

/// Runs the oblivious algorithm against an adversary and reports the
/// competitive ratio against the full-knowledge optimum of the revealed
/// instance.
pub fn simulate(
    visible: &VisibleInstance,
    objective: Objective,
    epsilon: &Rational,
    adversary: Adversary,
    hidden: Option<Vec<Rational>>,
    opt_mode: OptMode,
) -> Result<SimulationReport, ObliviousError> {
    let alg_tested = oblivious_choose(visible, objective, epsilon)?;
    let revealed = match adversary {
        Adversary::WorstCase => adversary_worst_case(visible, &alg_tested)?,
        Adversary::FixedVector => {
            let hidden = hidden.ok_or(ObliviousError::HiddenLengthMismatch {
                got: 0,
                expected: visible.n(),
            })?;
            visible.reveal(hidden)?
        }
    };

    let alg_value = objective_value(&revealed, &alg_tested, objective)?;
    let (opt_tested, opt_value) = match opt_mode {
        OptMode::Oracle { limit_n } => {
            if revealed.n() > limit_n {
                return Err(ObliviousError::OracleTooLarge { n: revealed.n() });
            }
            let res = exact_solve(&revealed, objective, limit_n)?;
            (res.best_tested, res.best_value)
        }
        OptMode::Fptas => match objective {
            Objective::Tct => {
                // The revealed instance may have general lower times; the
                // TCT FPTAS applies to the zero-lower case, which both
                // adversaries of interest produce for untested jobs. Fall
                // back to the oracle otherwise.
                if revealed.jobs().all(|j| revealed.p_low(j).unwrap().is_zero()) {
                    tct_fptas(&revealed, epsilon)?
                } else {
                    let res = exact_solve(&revealed, objective, crate::oracle::DEFAULT_ORACLE_LIMIT)?;
                    (res.best_tested, res.best_value)
                }
            }
            Objective::Makespan => makespan_fptas(&revealed, epsilon)?,
        },
    };

    let ratio = if opt_value.is_zero() {
        None
    } else {
        Some(&alg_value / &opt_value)
    };
    Ok(SimulationReport {
        objective,
        adversary,
        alg_tested: alg_tested.iter().map(|j| j.one_based()).collect(),
        alg_value: rational_to_string(&alg_value),
        opt_tested: opt_tested.iter().map(|j| j.one_based()).collect(),
        opt_value: rational_to_string(&opt_value),
        ratio: ratio.as_ref().map(rational_to_string),
        alg_value_exact: alg_value,
        opt_value_exact: opt_value,
        ratio_exact: ratio,
    })
}

/// The lower-bound family: `n` unit jobs with unit costs and budget `n/2`.
/// Identical for both objectives.
pub fn hard_instance(n: usize, _objective: Objective) -> Result<VisibleInstance, ObliviousError> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(ObliviousError::OddJobCount(n));
    }
    let instance = Instance::new(
        vec![crate::core::rat_int(1); n],
        vec![None; n],
        vec![crate::core::rat_int(1); n],
        crate::core::rat_int(n as i64 / 2),
    )?;
    Ok(VisibleInstance(instance))
}
