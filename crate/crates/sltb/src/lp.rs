//! Exact-arithmetic linear programming. A dense bounded-variable primal
//! simplex with Bland's rule over rationals: slow by industrial standards but
//! exact and deterministic, which the rounding pipeline depends on (it
//! detects fractional variables by equality, not by tolerance).

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::core::Rational;

/// Constraint relation; a `>=` row is expressed by negating a `Le` row.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Relation {
    Eq,
    Le,
}

/// A single linear constraint over sparse coefficients.
#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<(usize, Rational)>,
    pub relation: Relation,
    pub rhs: Rational,
}

/// A minimization program over box-bounded variables. `upper[j] = None`
/// means the variable is unbounded above; every other quantity is a finite
/// rational.
#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    pub objective: Vec<Rational>,
    pub lower: Vec<Rational>,
    pub upper: Vec<Option<Rational>>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new() -> LinearProgram {
        LinearProgram::default()
    }

    /// Adds a variable and returns its index.
    pub fn add_var(
        &mut self,
        objective: Rational,
        lower: Rational,
        upper: Option<Rational>,
    ) -> usize {
        self.objective.push(objective);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn add_constraint(
        &mut self,
        coeffs: Vec<(usize, Rational)>,
        relation: Relation,
        rhs: Rational,
    ) {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal {
        values: Vec<Rational>,
        objective: Rational,
    },
    Infeasible,
    Unbounded,
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("malformed program: {0}")]
    Malformed(String),
}

/// Solves `min c'x` subject to the constraints and variable bounds. Returns
/// an exactly optimal basic solution; infeasibility and unboundedness are
/// outcomes, not errors. Deterministic: the pivot rule is Bland's and the
/// presolve order is fixed.
pub fn solve_min(lp: &LinearProgram) -> Result<LpOutcome, LpError> {
    let n = lp.num_vars();
    if lp.lower.len() != n || lp.upper.len() != n {
        return Err(LpError::Malformed(format!(
            "bounds arrays have lengths {}/{} for {} variables",
            lp.lower.len(),
            lp.upper.len(),
            n
        )));
    }
    for c in &lp.constraints {
        for (v, _) in &c.coeffs {
            if *v >= n {
                return Err(LpError::Malformed(format!("constraint uses variable {v}")));
            }
        }
    }
    for j in 0..n {
        if let Some(u) = &lp.upper[j] {
            if u < &lp.lower[j] {
                return Ok(LpOutcome::Infeasible);
            }
        }
    }

    let presolved = match presolve(lp) {
        Presolved::Infeasible => return Ok(LpOutcome::Infeasible),
        Presolved::Reduced(p) => p,
    };

    if presolved.keep.is_empty() {
        let values: Vec<Rational> = presolved
            .fixed
            .into_iter()
            .map(|v| v.unwrap())
            .collect();
        let objective = dot(&lp.objective, &values);
        return Ok(LpOutcome::Optimal { values, objective });
    }

    let mut simplex = Simplex::build(lp, &presolved);
    match simplex.run() {
        SimplexOutcome::Infeasible => Ok(LpOutcome::Infeasible),
        SimplexOutcome::Unbounded => Ok(LpOutcome::Unbounded),
        SimplexOutcome::Optimal(reduced_values) => {
            let mut reduced = reduced_values.into_iter();
            let values: Vec<Rational> = presolved
                .fixed
                .into_iter()
                .map(|v| v.unwrap_or_else(|| reduced.next().unwrap()))
                .collect();
            let objective = dot(&lp.objective, &values);
            Ok(LpOutcome::Optimal { values, objective })
        }
    }
}

fn dot(c: &[Rational], x: &[Rational]) -> Rational {
    c.iter()
        .zip(x)
        .fold(Rational::zero(), |acc, (c, x)| acc + c * x)
}

enum Presolved {
    Infeasible,
    Reduced(PresolvedProgram),
}

/// A surviving row after presolve: coefficients over surviving variable
/// slots, relation and right-hand side.
type ReducedRow = (Vec<(usize, Rational)>, Relation, Rational);

struct PresolvedProgram {
    /// Per original variable: pinned value, or `None` if still free.
    fixed: Vec<Option<Rational>>,
    /// Original indices of the surviving variables, ascending.
    keep: Vec<usize>,
    rows: Vec<ReducedRow>,
}

/// Range of a linear form over the box, ignoring already-fixed variables.
/// `None` bounds mean unbounded in that direction.
struct FormRange {
    min: Option<Rational>,
    max: Option<Rational>,
}

fn form_range(
    free: &[(usize, &Rational)],
    lower: &[Rational],
    upper: &[Option<Rational>],
) -> FormRange {
    let mut min = Some(Rational::zero());
    let mut max = Some(Rational::zero());
    for (v, coeff) in free {
        if coeff.is_positive() {
            min = min.map(|m| m + *coeff * &lower[*v]);
            max = match (max, &upper[*v]) {
                (Some(m), Some(u)) => Some(m + *coeff * u),
                _ => None,
            };
        } else {
            max = max.map(|m| m + *coeff * &lower[*v]);
            min = match (min, &upper[*v]) {
                (Some(m), Some(u)) => Some(m + *coeff * u),
                _ => None,
            };
        }
    }
    FormRange { min, max }
}

/// Pins variables with equal bounds, then propagates: a row whose one-sided
/// range meets its rhs exactly forces every remaining variable in it to the
/// corresponding bound. Runs to a fixpoint. This keeps the simplex tableau
/// small when many variables are pinned by fixation constraints.
fn presolve(lp: &LinearProgram) -> Presolved {
    let n = lp.num_vars();
    let mut fixed: Vec<Option<Rational>> = (0..n)
        .map(|j| match &lp.upper[j] {
            Some(u) if u == &lp.lower[j] => Some(lp.lower[j].clone()),
            _ => None,
        })
        .collect();
    let mut dropped = vec![false; lp.constraints.len()];

    loop {
        let mut changed = false;
        for (idx, row) in lp.constraints.iter().enumerate() {
            if dropped[idx] {
                continue;
            }
            let mut rhs = row.rhs.clone();
            let mut free: Vec<(usize, &Rational)> = Vec::new();
            for (v, coeff) in &row.coeffs {
                if coeff.is_zero() {
                    continue;
                }
                match &fixed[*v] {
                    Some(val) => rhs -= coeff * val,
                    None => free.push((*v, coeff)),
                }
            }
            if free.is_empty() {
                let satisfied = match row.relation {
                    Relation::Eq => rhs.is_zero(),
                    Relation::Le => rhs >= Rational::zero(),
                };
                if !satisfied {
                    return Presolved::Infeasible;
                }
                dropped[idx] = true;
                changed = true;
                continue;
            }
            let range = form_range(&free, &lp.lower, &lp.upper);
            let pin_all = |fixed: &mut Vec<Option<Rational>>, to_min: bool| {
                for (v, coeff) in &free {
                    let at_lower = coeff.is_positive() == to_min;
                    fixed[*v] = Some(if at_lower {
                        lp.lower[*v].clone()
                    } else {
                        lp.upper[*v].clone().expect("bounded side of a tight row")
                    });
                }
            };
            match (&range.min, &range.max, row.relation) {
                (Some(min), _, _) if *min > rhs => return Presolved::Infeasible,
                (_, Some(max), Relation::Eq) if *max < rhs => return Presolved::Infeasible,
                (Some(min), _, _) if *min == rhs => {
                    pin_all(&mut fixed, true);
                    dropped[idx] = true;
                    changed = true;
                }
                (_, Some(max), Relation::Eq) if *max == rhs => {
                    pin_all(&mut fixed, false);
                    dropped[idx] = true;
                    changed = true;
                }
                (_, Some(max), Relation::Le) if *max <= rhs => {
                    dropped[idx] = true;
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            break;
        }
    }

    let keep: Vec<usize> = (0..n).filter(|&j| fixed[j].is_none()).collect();
    let mut slot_of = vec![usize::MAX; n];
    for (slot, &j) in keep.iter().enumerate() {
        slot_of[j] = slot;
    }
    let mut rows = Vec::new();
    for (idx, row) in lp.constraints.iter().enumerate() {
        if dropped[idx] {
            continue;
        }
        let mut rhs = row.rhs.clone();
        let mut coeffs: Vec<(usize, Rational)> = Vec::new();
        for (v, coeff) in &row.coeffs {
            if coeff.is_zero() {
                continue;
            }
            match &fixed[*v] {
                Some(val) => rhs -= coeff * val,
                None => coeffs.push((slot_of[*v], coeff.clone())),
            }
        }
        rows.push((coeffs, row.relation, rhs));
    }
    Presolved::Reduced(PresolvedProgram { fixed, keep, rows })
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum VarStatus {
    Basic(usize),
    AtLower,
    AtUpper,
}

enum SimplexOutcome {
    Optimal(Vec<Rational>),
    Infeasible,
    Unbounded,
}

/// Dense bounded-variable simplex. Columns are the surviving structural
/// variables, then slacks, then artificials; Bland's rule uses this fixed
/// column order for both the entering and the leaving choice.
struct Simplex {
    num_structural: usize,
    num_total: usize,
    first_artificial: usize,
    tableau: Vec<Vec<Rational>>,
    lower: Vec<Rational>,
    upper: Vec<Option<Rational>>,
    status: Vec<VarStatus>,
    basis: Vec<usize>,
    /// Current value of the basic variable of each row.
    beta: Vec<Rational>,
    costs: Vec<Rational>,
}

impl Simplex {
    fn build(lp: &LinearProgram, pre: &PresolvedProgram) -> Simplex {
        let ns = pre.keep.len();
        let m = pre.rows.len();
        let num_slacks = pre
            .rows
            .iter()
            .filter(|(_, rel, _)| *rel == Relation::Le)
            .count();

        let mut lower: Vec<Rational> = pre.keep.iter().map(|&j| lp.lower[j].clone()).collect();
        let mut upper: Vec<Option<Rational>> =
            pre.keep.iter().map(|&j| lp.upper[j].clone()).collect();
        let mut costs: Vec<Rational> =
            pre.keep.iter().map(|&j| lp.objective[j].clone()).collect();
        for _ in 0..num_slacks {
            lower.push(Rational::zero());
            upper.push(None);
            costs.push(Rational::zero());
        }
        let first_artificial = ns + num_slacks;

        let mut tableau: Vec<Vec<Rational>> = Vec::with_capacity(m);
        let mut residuals: Vec<Rational> = Vec::with_capacity(m);
        let mut slack_of_row: Vec<Option<usize>> = Vec::with_capacity(m);
        let mut slack_idx = ns;
        for (coeffs, rel, rhs) in &pre.rows {
            let mut row = vec![Rational::zero(); first_artificial];
            let mut residual = rhs.clone();
            for (slot, coeff) in coeffs {
                row[*slot] = coeff.clone();
                residual -= coeff * &lower[*slot];
            }
            if *rel == Relation::Le {
                row[slack_idx] = Rational::one();
                slack_of_row.push(Some(slack_idx));
                slack_idx += 1;
            } else {
                slack_of_row.push(None);
            }
            tableau.push(row);
            residuals.push(residual);
        }

        // Starting point: structural variables at their lower bound. Each row
        // gets a basic slack when that is feasible, otherwise an artificial
        // carrying the residual. Rows with a negative residual are negated
        // first so every basic column is a unit vector and the stored
        // tableau equals B^-1 A.
        let mut status: Vec<VarStatus> =
            (0..first_artificial).map(|_| VarStatus::AtLower).collect();
        let mut basis = Vec::with_capacity(m);
        let mut beta = Vec::with_capacity(m);
        let mut num_artificials = 0;
        for r in 0..m {
            match slack_of_row[r] {
                Some(s) if residuals[r] >= Rational::zero() => {
                    status[s] = VarStatus::Basic(r);
                    basis.push(s);
                    beta.push(residuals[r].clone());
                }
                _ => {
                    if residuals[r] < Rational::zero() {
                        for x in tableau[r].iter_mut() {
                            if !x.is_zero() {
                                *x = -x.clone();
                            }
                        }
                        residuals[r] = -residuals[r].clone();
                    }
                    let a = first_artificial + num_artificials;
                    num_artificials += 1;
                    for (rr, row) in tableau.iter_mut().enumerate() {
                        row.push(if rr == r {
                            Rational::one()
                        } else {
                            Rational::zero()
                        });
                    }
                    lower.push(Rational::zero());
                    upper.push(None);
                    costs.push(Rational::zero());
                    status.push(VarStatus::Basic(r));
                    basis.push(a);
                    beta.push(residuals[r].clone());
                }
            }
        }
        let num_total = first_artificial + num_artificials;
        for row in tableau.iter_mut() {
            row.resize(num_total, Rational::zero());
        }

        Simplex {
            num_structural: ns,
            num_total,
            first_artificial,
            tableau,
            lower,
            upper,
            status,
            basis,
            beta,
            costs,
        }
    }

    fn run(&mut self) -> SimplexOutcome {
        if self.first_artificial < self.num_total {
            let phase1: Vec<Rational> = (0..self.num_total)
                .map(|j| {
                    if j >= self.first_artificial {
                        Rational::one()
                    } else {
                        Rational::zero()
                    }
                })
                .collect();
            let bounded = self.optimize(&phase1);
            assert!(bounded, "phase 1 objective is bounded below by zero");
            let infeasibility: Rational = (self.first_artificial..self.num_total)
                .map(|j| self.value_of(j))
                .fold(Rational::zero(), |acc, v| acc + v);
            if !infeasibility.is_zero() {
                return SimplexOutcome::Infeasible;
            }
            // Artificials stay pinned at zero for phase 2.
            for j in self.first_artificial..self.num_total {
                self.upper[j] = Some(Rational::zero());
            }
        }
        let costs = self.costs.clone();
        if !self.optimize(&costs) {
            return SimplexOutcome::Unbounded;
        }
        let values = (0..self.num_structural).map(|j| self.value_of(j)).collect();
        SimplexOutcome::Optimal(values)
    }

    fn value_of(&self, j: usize) -> Rational {
        match self.status[j] {
            VarStatus::Basic(r) => self.beta[r].clone(),
            VarStatus::AtLower => self.lower[j].clone(),
            VarStatus::AtUpper => self.upper[j].clone().unwrap(),
        }
    }

    /// Bland-rule optimization loop; returns false on an unbounded direction.
    fn optimize(&mut self, costs: &[Rational]) -> bool {
        loop {
            let cb: Vec<Rational> = self.basis.iter().map(|&v| costs[v].clone()).collect();
            let mut entering: Option<(usize, bool)> = None;
            for (j, cost_j) in costs.iter().enumerate().take(self.num_total) {
                if matches!(self.status[j], VarStatus::Basic(_)) {
                    continue;
                }
                if self.upper[j].as_ref() == Some(&self.lower[j]) {
                    continue; // width-zero variable can never move
                }
                let mut z = cost_j.clone();
                for (r, cb_r) in cb.iter().enumerate() {
                    if !cb_r.is_zero() && !self.tableau[r][j].is_zero() {
                        z -= cb_r * &self.tableau[r][j];
                    }
                }
                let increasing = match self.status[j] {
                    VarStatus::AtLower if z < Rational::zero() => true,
                    VarStatus::AtUpper if z > Rational::zero() => false,
                    _ => continue,
                };
                entering = Some((j, increasing));
                break; // Bland: smallest eligible index
            }
            let Some((q, increasing)) = entering else {
                return true;
            };

            // Ratio test: the smallest step that drives a basic variable, or
            // the entering variable itself, onto a bound. Ties go to the
            // smallest variable index (Bland again).
            let mut best: Option<(Rational, usize, Option<usize>)> = None;
            if let Some(u) = &self.upper[q] {
                best = Some((u - &self.lower[q], q, None));
            }
            for r in 0..self.tableau.len() {
                let y = &self.tableau[r][q];
                if y.is_zero() {
                    continue;
                }
                let i = self.basis[r];
                let beta_decreases = increasing == (y > &Rational::zero());
                let limit = if beta_decreases {
                    Some(&self.beta[r] - &self.lower[i])
                } else {
                    self.upper[i].as_ref().map(|u| u - &self.beta[r])
                };
                let Some(limit) = limit else { continue };
                debug_assert!(limit >= Rational::zero(), "basis left its bounds");
                let rate = if y > &Rational::zero() {
                    y.clone()
                } else {
                    -y.clone()
                };
                let t = limit / rate;
                let replace = match &best {
                    None => true,
                    Some((bt, bi, _)) => t < *bt || (t == *bt && i < *bi),
                };
                if replace {
                    best = Some((t, i, Some(r)));
                }
            }
            let Some((t, _, leaving_row)) = best else {
                return false;
            };

            if !t.is_zero() {
                let signed_t = if increasing { t.clone() } else { -t.clone() };
                for r in 0..self.tableau.len() {
                    if !self.tableau[r][q].is_zero() {
                        let delta = &signed_t * &self.tableau[r][q];
                        self.beta[r] -= delta;
                    }
                }
            }

            match leaving_row {
                None => {
                    self.status[q] = if increasing {
                        VarStatus::AtUpper
                    } else {
                        VarStatus::AtLower
                    };
                }
                Some(r) => {
                    let start = match self.status[q] {
                        VarStatus::AtLower => self.lower[q].clone(),
                        VarStatus::AtUpper => self.upper[q].clone().unwrap(),
                        VarStatus::Basic(_) => unreachable!(),
                    };
                    let entering_value = if increasing { start + &t } else { start - &t };
                    let leaving = self.basis[r];
                    let hit_lower = increasing == (self.tableau[r][q] > Rational::zero());
                    debug_assert_eq!(
                        self.beta[r],
                        if hit_lower {
                            self.lower[leaving].clone()
                        } else {
                            self.upper[leaving].clone().unwrap()
                        }
                    );
                    self.status[leaving] = if hit_lower {
                        VarStatus::AtLower
                    } else {
                        VarStatus::AtUpper
                    };
                    self.status[q] = VarStatus::Basic(r);
                    self.basis[r] = q;
                    self.beta[r] = entering_value;

                    let pivot = self.tableau[r][q].clone();
                    if !pivot.is_one() {
                        for x in self.tableau[r].iter_mut() {
                            if !x.is_zero() {
                                *x /= &pivot;
                            }
                        }
                    }
                    let pivot_row = std::mem::take(&mut self.tableau[r]);
                    for (rr, row) in self.tableau.iter_mut().enumerate() {
                        if rr == r || row[q].is_zero() {
                            continue;
                        }
                        let factor = row[q].clone();
                        for (x, p) in row.iter_mut().zip(&pivot_row) {
                            if !p.is_zero() {
                                *x -= &factor * p;
                            }
                        }
                        debug_assert!(row[q].is_zero());
                    }
                    self.tableau[r] = pivot_row;
                }
            }
        }
    }
}
