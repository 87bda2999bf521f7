//! Benchmark harness: runs an algorithm x instance grid, compares against
//! the oracle where the instance size permits, writes CSV and a text table,
//! and reports guarantee violations through the exit code.

use std::collections::BTreeSet;
use std::fs::File;
use std::time::Instant;

use anyhow::{anyhow, Result};
use clap::Args;
use num_traits::ToPrimitive;
use rayon::prelude::*;

use sltb::core::{rat_int, rational_from_str, rational_to_string, Instance, Rational};
use sltb::generator::{generate, GeneratorSpec};
use sltb::makespan::{makespan_dp_exact, makespan_fptas, makespan_uniform_greedy};
use sltb::oracle::exact_solve;
use sltb::ptas::{accuracy_steps, pinned_position_count, ptas_solve};
use sltb::tct_dp::{reduce_equal_low, tct_dp_exact, tct_fptas, tct_uniform_greedy};
use sltb::{JobId, Objective};

#[derive(Args)]
pub struct BenchArgs {
    /// Objective for the whole grid.
    #[arg(long, value_enum)]
    objective: super::ObjectiveArg,
    /// Algorithms to run: dp, greedy, fptas:EPS, ptas:EPS (comma separated).
    #[arg(long, value_delimiter = ',')]
    algos: Vec<String>,
    /// Number of seeded instances.
    #[arg(long, default_value_t = 20)]
    count: u64,
    /// Jobs per instance.
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Upper processing times are uniform integers in [0, this].
    #[arg(long, default_value_t = 15)]
    p_up_max: u64,
    /// Lower-time fraction of the upper time (defaults to zero, which every
    /// algorithm accepts).
    #[arg(long, default_value = "0")]
    p_low_fraction: String,
    /// Costs are uniform integers in [0, this].
    #[arg(long, default_value_t = 8)]
    cost_max: u64,
    /// Budget as a fraction of total cost.
    #[arg(long, default_value = "1/2")]
    budget_fraction: String,
    /// Base seed; instance i uses seed base+i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip the oracle column above this size.
    #[arg(long, default_value_t = sltb::oracle::DEFAULT_ORACLE_LIMIT)]
    oracle_limit: usize,
    /// CSV output path.
    #[arg(long)]
    csv: Option<String>,
}

#[derive(Clone)]
struct AlgoSpec {
    name: String,
    kind: AlgoKind,
}

#[derive(Clone)]
enum AlgoKind {
    Dp,
    Greedy,
    Fptas(Rational),
    Ptas(Rational),
}

fn parse_algos(raw: &[String], objective: Objective) -> Result<Vec<AlgoSpec>> {
    let mut specs = Vec::new();
    for item in raw {
        let (head, eps) = match item.split_once(':') {
            None => (item.as_str(), None),
            Some((h, e)) => (h, Some(rational_from_str(e)?)),
        };
        let kind = match head {
            "dp" => AlgoKind::Dp,
            "greedy" => AlgoKind::Greedy,
            "fptas" => AlgoKind::Fptas(
                eps.clone()
                    .ok_or_else(|| anyhow!("fptas needs an accuracy, e.g. fptas:1/2"))?,
            ),
            "ptas" => {
                if objective != Objective::Tct {
                    return Err(anyhow!("the PTAS targets total completion time only"));
                }
                AlgoKind::Ptas(
                    eps.clone()
                        .ok_or_else(|| anyhow!("ptas needs an accuracy, e.g. ptas:1"))?,
                )
            }
            other => return Err(anyhow!("unknown algorithm {other:?}")),
        };
        specs.push(AlgoSpec {
            name: item.clone(),
            kind,
        });
    }
    // An empty suite is legal: the grid is empty and the run succeeds.
    Ok(specs)
}

/// Guarantee factor an algorithm promises relative to the optimum.
fn guarantee(kind: &AlgoKind) -> Result<Rational> {
    Ok(match kind {
        AlgoKind::Dp | AlgoKind::Greedy => rat_int(1),
        AlgoKind::Fptas(eps) => rat_int(1) + eps,
        AlgoKind::Ptas(eps) => {
            let q = accuracy_steps(eps)?;
            let m = pinned_position_count(q) as i64;
            // (M+1)/M * ((1 + 1/q) + 2/M)
            Rational::new((m + 1).into(), m.into())
                * (rat_int(1) + Rational::new(1.into(), (q as i64).into())
                    + Rational::new(2.into(), m.into()))
        }
    })
}

struct BenchRow {
    seed: u64,
    algo: String,
    value: Result<Rational, String>,
    oracle: Option<Rational>,
    micros: u128,
}

impl BenchRow {
    fn ratio(&self) -> Option<Rational> {
        match (&self.value, &self.oracle) {
            (Ok(v), Some(o)) if o > &Rational::from_integer(0.into()) => Some(v / o),
            _ => None,
        }
    }
}

fn run_algo(
    kind: &AlgoKind,
    instance: &Instance,
    objective: Objective,
) -> Result<(BTreeSet<JobId>, Rational), String> {
    let run = || -> anyhow::Result<(BTreeSet<JobId>, Rational)> {
        Ok(match (objective, kind) {
            (Objective::Tct, AlgoKind::Dp) => {
                let (reduced, offset) = reduce_equal_low(instance)?;
                let res = tct_dp_exact(&reduced)?;
                (res.best_tested, res.best_value + offset)
            }
            (Objective::Tct, AlgoKind::Fptas(eps)) => {
                let (reduced, offset) = reduce_equal_low(instance)?;
                let (tested, value) = tct_fptas(&reduced, eps)?;
                (tested, value + offset)
            }
            (Objective::Tct, AlgoKind::Greedy) => {
                let (reduced, offset) = reduce_equal_low(instance)?;
                let k = budget_as_count(instance)?;
                let (tested, value) = tct_uniform_greedy(&reduced, k)?;
                (tested, value + offset)
            }
            (Objective::Tct, AlgoKind::Ptas(eps)) => {
                let (schedule, value) = ptas_solve(instance, eps)?;
                (schedule.tested, value)
            }
            (Objective::Makespan, AlgoKind::Dp) => {
                let res = makespan_dp_exact(instance)?;
                (res.best_tested, res.best_value)
            }
            (Objective::Makespan, AlgoKind::Fptas(eps)) => makespan_fptas(instance, eps)?,
            (Objective::Makespan, AlgoKind::Greedy) => {
                makespan_uniform_greedy(instance, budget_as_count(instance)?)?
            }
            (Objective::Makespan, AlgoKind::Ptas(_)) => {
                unreachable!("rejected while parsing")
            }
        })
    };
    run().map_err(|e| e.to_string())
}

/// The uniform greedy reads the budget as a test count.
fn budget_as_count(instance: &Instance) -> anyhow::Result<usize> {
    let unit = rat_int(1);
    if instance.jobs().any(|j| instance.cost(j) != &unit) {
        return Err(anyhow!("greedy needs unit costs in the bench grid"));
    }
    instance
        .budget()
        .floor()
        .to_integer()
        .to_usize()
        .ok_or_else(|| anyhow!("budget too large"))
}

pub fn run(args: &BenchArgs, float: bool) -> Result<usize> {
    let objective: Objective = args.objective.into();
    let algos = parse_algos(&args.algos, objective)?;

    let instances: Vec<(u64, Instance)> = (0..args.count)
        .map(|i| {
            let seed = args.seed + i;
            let spec = GeneratorSpec {
                n: args.n,
                p_up_max: args.p_up_max,
                p_low_fraction: Some(rational_from_str(&args.p_low_fraction)?),
                cost_max: args.cost_max,
                budget_fraction: rational_from_str(&args.budget_fraction)?,
                seed,
            };
            Ok((seed, generate(&spec)?))
        })
        .collect::<Result<Vec<_>>>()?;

    let grid: Vec<(usize, usize)> = (0..instances.len())
        .flat_map(|i| (0..algos.len()).map(move |a| (i, a)))
        .collect();
    let mut rows: Vec<BenchRow> = grid
        .par_iter()
        .map(|&(i, a)| {
            let (seed, instance) = &instances[i];
            let algo = &algos[a];
            let started = Instant::now();
            let value = run_algo(&algo.kind, instance, objective).map(|(_, v)| v);
            let micros = started.elapsed().as_micros();
            let oracle = if instance.n() <= args.oracle_limit {
                exact_solve(instance, objective, args.oracle_limit)
                    .ok()
                    .map(|r| r.best_value)
            } else {
                None
            };
            BenchRow {
                seed: *seed,
                algo: algo.name.clone(),
                value,
                oracle,
                micros,
            }
        })
        .collect();
    // Deterministic output order regardless of the parallel schedule.
    rows.sort_by(|x, y| x.seed.cmp(&y.seed).then_with(|| x.algo.cmp(&y.algo)));

    let mut violations = 0usize;
    let bound_of: Vec<(String, Rational)> = algos
        .iter()
        .map(|a| Ok((a.name.clone(), guarantee(&a.kind)?)))
        .collect::<Result<Vec<_>>>()?;
    for row in &rows {
        if let (Ok(value), Some(oracle)) = (&row.value, &row.oracle) {
            let bound = &bound_of
                .iter()
                .find(|(n, _)| n == &row.algo)
                .expect("algo present")
                .1;
            if value < oracle || value > &(bound * oracle) {
                violations += 1;
                eprintln!(
                    "guarantee violation: seed {} algo {} value {} oracle {} bound {}",
                    row.seed,
                    row.algo,
                    rational_to_string(value),
                    rational_to_string(oracle),
                    rational_to_string(bound),
                );
            }
        }
    }

    let fmt_value = |r: &Rational| {
        if float {
            format!("{:.6}", r.to_f64().unwrap_or(f64::NAN))
        } else {
            rational_to_string(r)
        }
    };
    println!(
        "{:>6}  {:<12} {:<9} {:>14} {:>14} {:>10} {:>9}",
        "seed", "algo", "objective", "value", "oracle", "ratio", "micros"
    );
    for row in &rows {
        let value = match &row.value {
            Ok(v) => fmt_value(v),
            Err(e) => format!("error: {e}"),
        };
        let oracle = row.oracle.as_ref().map(&fmt_value).unwrap_or_default();
        let ratio = row.ratio().map(|r| fmt_value(&r)).unwrap_or_default();
        println!(
            "{:>6}  {:<12} {:<9} {:>14} {:>14} {:>10} {:>9}",
            row.seed,
            row.algo,
            objective.to_string(),
            value,
            oracle,
            ratio,
            row.micros
        );
    }
    println!(
        "rows: {}, guarantee violations: {violations}",
        rows.len()
    );

    if let Some(path) = &args.csv {
        let mut writer = csv::Writer::from_writer(File::create(path)?);
        writer.write_record(["seed", "algo", "objective", "value", "oracle", "ratio", "micros"])?;
        for row in &rows {
            writer.write_record([
                row.seed.to_string(),
                row.algo.clone(),
                objective.to_string(),
                match &row.value {
                    Ok(v) => rational_to_string(v),
                    Err(e) => format!("error: {e}"),
                },
                row.oracle.as_ref().map(rational_to_string).unwrap_or_default(),
                row.ratio().map(|r| rational_to_string(&r)).unwrap_or_default(),
                row.micros.to_string(),
            ])?;
        }
        writer.flush()?;
    }
    Ok(violations)
}
