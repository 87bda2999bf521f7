//! `sltb`: solvers and simulators for scheduling with a limited testing
//! budget on a single machine. One JSON instance document in, JSON (or CSV
//! for benchmarks) out; no persistent state.

mod bench;

use std::collections::BTreeSet;
use std::fs;
use std::io::Read;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::ToPrimitive;
use serde_json::json;

use sltb::core::{
    instance_from_json, instance_to_json, rational_from_str, rational_to_string, Instance,
    Rational,
};
use sltb::generator::{generate, GeneratorSpec};
use sltb::makespan::{makespan_dp_exact, makespan_fptas, makespan_uniform_greedy};
use sltb::oblivious::{
    hard_instance, simulate, Adversary, OptMode, SimulationReport, VisibleInstance,
};
use sltb::oracle::{exact_solve, DEFAULT_ORACLE_LIMIT};
use sltb::ptas::{ptas_solve, ptas_solve_traced};
use sltb::reductions::{
    knapsack_to_sltb, partition_to_sltb, sltb_to_knapsack, verify_partition_reduction,
    PartitionVerification,
};
use sltb::tct_dp::{reduce_equal_low, tct_dp_exact, tct_fptas, tct_uniform_greedy};
use sltb::{JobId, Objective};

#[derive(Parser)]
#[command(name = "sltb", version, about)]
struct Cli {
    /// Additionally render rational values as floats (display only; all
    /// computation stays exact).
    #[arg(long, global = true)]
    float: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ObjectiveArg {
    Tct,
    Makespan,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Objective {
        match o {
            ObjectiveArg::Tct => Objective::Tct,
            ObjectiveArg::Makespan => Objective::Makespan,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AlgoArg {
    Dp,
    Fptas,
    Greedy,
    Ptas,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AdversaryArg {
    Worst,
    Fixed,
}

#[derive(Args)]
struct GeneratorArgs {
    /// Number of jobs.
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Upper processing times are uniform integers in [0, this].
    #[arg(long, default_value_t = 20)]
    p_up_max: u64,
    /// Lower time as a fraction of the upper time ("1/2"); omit for hidden
    /// lower times.
    #[arg(long)]
    p_low_fraction: Option<String>,
    /// Costs are uniform integers in [0, this].
    #[arg(long, default_value_t = 10)]
    cost_max: u64,
    /// Budget as a fraction of the total cost ("1/3").
    #[arg(long, default_value = "1/2")]
    budget_fraction: String,
    /// RNG seed; fully determines the instance.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl GeneratorArgs {
    fn to_spec(&self, seed: u64) -> Result<GeneratorSpec> {
        Ok(GeneratorSpec {
            n: self.n,
            p_up_max: self.p_up_max,
            p_low_fraction: self
                .p_low_fraction
                .as_deref()
                .map(rational_from_str)
                .transpose()?,
            cost_max: self.cost_max,
            budget_fraction: rational_from_str(&self.budget_fraction)?,
            seed,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance as a JSON document.
    Gen {
        #[command(flatten)]
        gen: GeneratorArgs,
    },
    /// Solve an instance with a chosen algorithm.
    Solve {
        #[arg(long, value_enum)]
        objective: ObjectiveArg,
        #[arg(long, value_enum)]
        algo: AlgoArg,
        /// Accuracy parameter for fptas/ptas, e.g. "1/2".
        #[arg(long)]
        epsilon: Option<String>,
        /// Number of tests for the uniform-cost greedy (defaults to the
        /// instance budget, which must then be a unit-cost count).
        #[arg(long)]
        k: Option<usize>,
        /// Dump per-phase events of the PTAS pipeline as JSON lines.
        #[arg(long)]
        trace: bool,
        /// Instance JSON path ("-" for stdin).
        #[arg(long, default_value = "-")]
        input: String,
    },
    /// Brute-force exact solve (ground truth; exponential in n).
    Oracle {
        #[arg(long, value_enum)]
        objective: ObjectiveArg,
        #[arg(long, default_value = "-")]
        input: String,
        #[arg(long, default_value_t = DEFAULT_ORACLE_LIMIT)]
        limit_n: usize,
    },
    /// Simulate the oblivious algorithm against an adversary.
    Oblivious {
        #[arg(long, value_enum)]
        objective: ObjectiveArg,
        #[arg(long, default_value = "1/2")]
        epsilon: String,
        #[arg(long, value_enum, default_value = "worst")]
        adversary: AdversaryArg,
        /// JSON array of hidden lower times (required for --adversary fixed).
        #[arg(long)]
        hidden: Option<String>,
        /// Simulate this many generated instances instead of reading one.
        #[arg(long)]
        seeds: Option<u64>,
        /// Simulate the worst-case lower-bound family with this many jobs
        /// (even) instead of reading an instance.
        #[arg(long)]
        hard: Option<usize>,
        #[command(flatten)]
        gen: GeneratorArgs,
        #[arg(long, default_value = "-")]
        input: String,
        /// Use the FPTAS for the revealed optimum instead of the oracle.
        #[arg(long)]
        fptas_opt: bool,
    },
    /// Hardness-reduction instance generators.
    Reduce {
        #[command(subcommand)]
        which: ReduceCommand,
    },
    /// Algorithm x instance benchmark grid with oracle comparison.
    Bench(bench::BenchArgs),
}

#[derive(Subcommand)]
enum ReduceCommand {
    /// Partition -> total-completion-time instance.
    Partition {
        /// Comma-separated positive integers, e.g. "2,2".
        #[arg(long, value_delimiter = ',')]
        u: Vec<u64>,
        /// Check the equivalence with the oracle (small inputs only).
        #[arg(long)]
        verify: bool,
    },
    /// Knapsack -> makespan instance.
    Knapsack {
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        weights: Vec<String>,
        #[arg(long)]
        capacity: String,
    },
}

fn read_instance(path: &str) -> Result<Instance> {
    let json = if path == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .context("reading instance from stdin")?;
        buf
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {path}"))?
    };
    Ok(instance_from_json(&json)?)
}

fn value_json(value: &Rational, float: bool) -> serde_json::Value {
    if float {
        json!({
            "exact": rational_to_string(value),
            "float": value.to_f64(),
        })
    } else {
        json!(rational_to_string(value))
    }
}

fn tested_json(tested: &BTreeSet<JobId>) -> serde_json::Value {
    json!(tested.iter().map(|j| j.one_based()).collect::<Vec<_>>())
}

/// Greedy test count: explicit `--k`, otherwise the budget of a unit-cost
/// instance.
fn greedy_k(instance: &Instance, k: Option<usize>) -> Result<usize> {
    if let Some(k) = k {
        return Ok(k);
    }
    let unit = sltb::core::rat_int(1);
    if instance.jobs().any(|j| instance.cost(j) != &unit) {
        bail!("greedy treats every cost as one unit: pass --k or use unit costs");
    }
    let b = instance.budget();
    if !b.is_integer() {
        bail!("budget {} is not an integral test count; pass --k", rational_to_string(b));
    }
    b.to_integer()
        .to_usize()
        .ok_or_else(|| anyhow!("budget too large for a test count"))
}

fn solve(
    objective: Objective,
    algo: AlgoArg,
    epsilon: Option<String>,
    k: Option<usize>,
    trace: bool,
    instance: &Instance,
    float: bool,
) -> Result<()> {
    let epsilon = epsilon.as_deref().map(rational_from_str).transpose()?;
    let need_eps = || {
        epsilon
            .clone()
            .ok_or_else(|| anyhow!("--epsilon is required for this algorithm"))
    };
    let started = Instant::now();
    let (algo_name, tested, value) = match (objective, algo) {
        (Objective::Tct, AlgoArg::Dp) => {
            let (reduced, offset) = reduce_equal_low(instance).map_err(|_| {
                anyhow!(
                    "the TCT dynamic program needs all lower processing times \
                     equal (zero after the reduction); this instance mixes them"
                )
            })?;
            let res = tct_dp_exact(&reduced)?;
            ("dp", res.best_tested, res.best_value + offset)
        }
        (Objective::Tct, AlgoArg::Fptas) => {
            let (reduced, offset) = reduce_equal_low(instance).map_err(|_| {
                anyhow!(
                    "the TCT FPTAS needs all lower processing times equal \
                     (zero after the reduction); this instance mixes them"
                )
            })?;
            let (tested, value) = tct_fptas(&reduced, &need_eps()?)?;
            ("fptas", tested, value + offset)
        }
        (Objective::Tct, AlgoArg::Greedy) => {
            let (reduced, offset) = reduce_equal_low(instance)
                .map_err(|_| anyhow!("the uniform greedy needs equal lower processing times"))?;
            let k = greedy_k(instance, k)?;
            let (tested, value) = tct_uniform_greedy(&reduced, k)?;
            ("greedy", tested, value + offset)
        }
        (Objective::Tct, AlgoArg::Ptas) => {
            let eps = need_eps()?;
            let (schedule, value) = if trace {
                let mut sink = |event: sltb::ptas::TraceEvent| {
                    println!("{}", serde_json::to_string(&event).expect("trace serializes"));
                };
                ptas_solve_traced(instance, &eps, &mut sink)?
            } else {
                ptas_solve(instance, &eps)?
            };
            ("ptas", schedule.tested, value)
        }
        (Objective::Makespan, AlgoArg::Dp) => {
            let res = makespan_dp_exact(instance)?;
            ("dp", res.best_tested, res.best_value)
        }
        (Objective::Makespan, AlgoArg::Fptas) => {
            let (tested, value) = makespan_fptas(instance, &need_eps()?)?;
            ("fptas", tested, value)
        }
        (Objective::Makespan, AlgoArg::Greedy) => {
            let k = greedy_k(instance, k)?;
            let (tested, value) = makespan_uniform_greedy(instance, k)?;
            ("greedy", tested, value)
        }
        (Objective::Makespan, AlgoArg::Ptas) => {
            bail!("the PTAS targets total completion time; use dp or fptas for makespan")
        }
    };
    let micros = started.elapsed().as_micros();
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "algo": algo_name,
            "objective": objective,
            "tested": tested_json(&tested),
            "value": value_json(&value, float),
            "micros": micros,
        }))?
    );
    Ok(())
}

fn oblivious_summary(reports: &[SimulationReport], float: bool) -> serde_json::Value {
    let ratios: Vec<&Rational> = reports
        .iter()
        .filter_map(|r| r.ratio_exact.as_ref())
        .collect();
    if ratios.is_empty() {
        return json!({ "runs": reports.len(), "ratios": 0 });
    }
    let max = ratios.iter().max().unwrap();
    let sum = ratios
        .iter()
        .fold(Rational::from_integer(0.into()), |a, r| a + *r);
    let mean = sum / Rational::from_integer((ratios.len() as i64).into());
    json!({
        "runs": reports.len(),
        "ratios": ratios.len(),
        "max_ratio": value_json(max, float),
        "mean_ratio": value_json(&mean, float),
    })
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Gen { gen } => {
            let instance = generate(&gen.to_spec(gen.seed)?)?;
            println!("{}", instance_to_json(&instance));
        }
        Command::Solve {
            objective,
            algo,
            epsilon,
            k,
            trace,
            input,
        } => {
            let instance = read_instance(&input)?;
            solve(objective.into(), algo, epsilon, k, trace, &instance, cli.float)?;
        }
        Command::Oracle {
            objective,
            input,
            limit_n,
        } => {
            let instance = read_instance(&input)?;
            let started = Instant::now();
            let res = exact_solve(&instance, objective.into(), limit_n)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&json!({
                    "algo": "oracle",
                    "objective": res.objective,
                    "tested": tested_json(&res.best_tested),
                    "value": value_json(&res.best_value, cli.float),
                    "subsets_examined": res.subsets_examined,
                    "micros": started.elapsed().as_micros(),
                }))?
            );
        }
        Command::Oblivious {
            objective,
            epsilon,
            adversary,
            hidden,
            seeds,
            hard,
            gen,
            input,
            fptas_opt,
        } => {
            let objective: Objective = objective.into();
            let epsilon = rational_from_str(&epsilon)?;
            let adversary = match adversary {
                AdversaryArg::Worst => Adversary::WorstCase,
                AdversaryArg::Fixed => Adversary::FixedVector,
            };
            let hidden: Option<Vec<Rational>> = hidden
                .map(|path| -> Result<Vec<Rational>> {
                    let text = fs::read_to_string(&path)?;
                    let raw: Vec<String> = serde_json::from_str(&text)?;
                    raw.iter()
                        .map(|s| Ok(rational_from_str(s)?))
                        .collect::<Result<Vec<_>>>()
                })
                .transpose()?;
            let opt_mode = if fptas_opt {
                OptMode::Fptas
            } else {
                OptMode::Oracle {
                    limit_n: DEFAULT_ORACLE_LIMIT,
                }
            };
            let visibles: Vec<VisibleInstance> = if let Some(n) = hard {
                vec![hard_instance(n, objective)?]
            } else {
                match seeds {
                    Some(count) => (0..count)
                        .map(|seed| Ok(VisibleInstance::new(&generate(&gen.to_spec(seed)?)?)))
                        .collect::<Result<Vec<_>>>()?,
                    None => vec![VisibleInstance::new(&read_instance(&input)?)],
                }
            };
            let mut reports = Vec::new();
            for visible in &visibles {
                let report = simulate(
                    visible,
                    objective,
                    &epsilon,
                    adversary.clone(),
                    hidden.clone(),
                    opt_mode,
                )?;
                println!("{}", serde_json::to_string(&report)?);
                reports.push(report);
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&oblivious_summary(&reports, cli.float))?
            );
        }
        Command::Reduce { which } => match which {
            ReduceCommand::Partition { u, verify } => {
                let red = partition_to_sltb(&u)?;
                let mut out = json!({
                    "u": red.u,
                    "a": red.a.iter().map(rational_to_string).collect::<Vec<_>>(),
                    "b": red.b.iter().map(rational_to_string).collect::<Vec<_>>(),
                    "target": value_json(&red.target, cli.float),
                    "instance": serde_json::from_str::<serde_json::Value>(
                        &instance_to_json(&red.instance)
                    )?,
                });
                if verify {
                    let verdict = match verify_partition_reduction(&red)? {
                        PartitionVerification::Consistent { partition_yes } => json!({
                            "consistent": true,
                            "partition_yes": partition_yes,
                        }),
                        PartitionVerification::MissedPartition { subset } => json!({
                            "consistent": false,
                            "witness_subset": subset,
                        }),
                        PartitionVerification::SpuriousSolution { tested, value } => json!({
                            "consistent": false,
                            "witness_tested": tested_json(&tested),
                            "witness_value": rational_to_string(&value),
                        }),
                    };
                    out["verification"] = verdict;
                }
                println!("{}", serde_json::to_string_pretty(&out)?);
            }
            ReduceCommand::Knapsack {
                values,
                weights,
                capacity,
            } => {
                let values = values
                    .iter()
                    .map(|s| Ok(rational_from_str(s)?))
                    .collect::<Result<Vec<_>>>()?;
                let weights = weights
                    .iter()
                    .map(|s| Ok(rational_from_str(s)?))
                    .collect::<Result<Vec<_>>>()?;
                let capacity = rational_from_str(&capacity)?;
                let instance = knapsack_to_sltb(&values, &weights, &capacity)?;
                let view = sltb_to_knapsack(&instance)?;
                assert_eq!(view.values, values);
                println!("{}", instance_to_json(&instance));
            }
        },
        Command::Bench(args) => {
            let violations = bench::run(&args, cli.float)?;
            if violations > 0 {
                std::process::exit(1);
            }
        }
    }
    Ok(())
}
