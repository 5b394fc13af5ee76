use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use qitags_core::analysis::{
    alpha_sweep_with, brute_force_optimal_with, default_alphas, generate_infeasible_instance, generate_instance, GeneratorConfig, ORACLE_MAX_ASSIGNMENTS,
};
use qitags_core::io::{
    document_from_domain, read_instance, write_instance, write_json, write_learning_curve_csv, write_sweep_csv, LearningCurve, OracleDocument, RunMetadata,
    SolutionDocument,
};
use qitags_core::learning::{active_learn, roster_dataset, uniform_envelope, Dataset, GpHyper};
use qitags_core::model::total_allocation_quality;
use qitags_core::motion::PathCache;
use qitags_core::search::{qitags_solve_with, SearchConfig};
use qitags_core::{Execution, ProblemDomain};

const EXIT_INFEASIBLE: u8 = 2;

#[derive(Parser)]
#[command(name = "qitags", version, about = "Quality-optimized task allocation for heterogeneous robot teams")]
struct Cli {
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance and write solution.json.
    Solve {
        instance: PathBuf,
        /// Overrides the instance's alpha.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value = "solution.json")]
        out: PathBuf,
        /// Also run the exhaustive oracle and fill in the optimality gap.
        #[arg(long)]
        oracle: bool,
    },
    /// Exhaustively find the best feasible allocation and write oracle.json.
    Oracle {
        instance: PathBuf,
        #[arg(long, default_value = "oracle.json")]
        out: PathBuf,
    },
    /// Solve once per alpha and write sweep.csv.
    Sweep {
        instance: PathBuf,
        /// Comma-separated alphas; defaults to 0.0, 0.1, ..., 1.0.
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        #[arg(long, default_value = "sweep.csv")]
        out: PathBuf,
    },
    /// Learn a trait-quality map and write learning_curve.csv.
    Learn {
        /// CSV with trait columns followed by a label column.
        #[arg(required_unless_present = "synthetic")]
        dataset: Option<PathBuf>,
        /// Use the built-in synthetic roster dataset for this position (0-5).
        #[arg(long, conflicts_with = "dataset")]
        synthetic: Option<usize>,
        #[arg(long, default_value_t = 50)]
        budget: usize,
        /// Number of uniform-baseline seeds.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long, value_enum, default_value_t = Strategy::Both)]
        strategy: Strategy,
        #[arg(long, default_value_t = 0.2)]
        eval_fraction: f64,
        /// Seed for the evaluation split and the synthetic dataset.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "learning_curve.csv")]
        out: PathBuf,
        /// Save the max-entropy model for use as a learned quality map.
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Write a random instance.
    Generate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Pick a budget no allocation can meet.
        #[arg(long)]
        infeasible: bool,
        #[arg(long, default_value = "instance.json")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Strategy {
    Entropy,
    Uniform,
    Both,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    match cli.command {
        Command::Solve {
            instance,
            alpha,
            out,
            oracle,
        } => solve(&instance, alpha, &out, oracle, exec),
        Command::Oracle { instance, out } => oracle(&instance, &out, exec),
        Command::Sweep { instance, alphas, out } => sweep(&instance, alphas, &out, exec),
        Command::Learn {
            dataset,
            synthetic,
            budget,
            seeds,
            strategy,
            eval_fraction,
            seed,
            out,
            model_out,
        } => {
            let data = match (dataset, synthetic) {
                (Some(path), _) => Dataset::from_csv(&path).with_context(|| format!("reading {}", path.display()))?,
                (None, Some(p)) if p < 6 => roster_dataset(p, seed),
                (None, Some(p)) => bail!("synthetic position {p} out of range 0-5"),
                (None, None) => unreachable!("clap requires one of them"),
            };
            learn(&data, budget, seeds, strategy, eval_fraction, seed, &out, model_out.as_deref(), exec)
        }
        Command::Generate { seed, infeasible, out } => {
            let cfg = GeneratorConfig::default();
            let domain = if infeasible {
                generate_infeasible_instance(seed, &cfg)?
            } else {
                generate_instance(seed, &cfg)?
            };
            write_instance(&out, &document_from_domain(&domain, Some(seed))?)?;
            println!(
                "wrote {} ({} tasks, {} robots, budget {:.3})",
                out.display(),
                domain.num_tasks(),
                domain.num_robots(),
                domain.time_budget()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load(path: &Path, alpha: Option<f64>) -> Result<ProblemDomain> {
    let domain = read_instance(path)?.domain;
    Ok(match alpha {
        Some(a) => domain.with_alpha(a)?,
        None => domain,
    })
}

fn solve(instance: &Path, alpha: Option<f64>, out: &Path, with_oracle: bool, exec: Execution) -> Result<ExitCode> {
    let domain = load(instance, alpha)?;
    let cache = PathCache::new();
    let result = qitags_solve_with(&domain, &SearchConfig { execution: exec }, &cache)?;
    let mut solution = result.outcome.solution().cloned();
    if with_oracle {
        let optimum = brute_force_optimal_with(&domain, exec, &cache)?;
        if let (Some(sol), Some(q)) = (solution.as_mut(), optimum.quality()) {
            sol.bound_report = sol.bound_report.take().map(|b| b.with_optimal(q));
        }
    }
    write_json(out, &SolutionDocument::new(&domain, solution.as_ref(), &result.stats))?;
    match solution {
        Some(sol) => {
            println!(
                "solution: quality {:.6} makespan {:.3} budget {:.3} expanded {} ({})",
                sol.total_quality,
                sol.schedule.makespan,
                domain.time_budget(),
                result.stats.nodes_expanded,
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        None => {
            println!(
                "infeasible: no allocation meets budget {:.3} after {} nodes ({})",
                domain.time_budget(),
                result.stats.nodes_expanded,
                out.display()
            );
            Ok(ExitCode::from(EXIT_INFEASIBLE))
        }
    }
}

fn oracle(instance: &Path, out: &Path, exec: Execution) -> Result<ExitCode> {
    let domain = load(instance, None)?;
    let assignments = domain.num_tasks() * domain.num_robots();
    if assignments > ORACLE_MAX_ASSIGNMENTS {
        bail!("instance has {assignments} robot-task assignments; the oracle handles at most {ORACLE_MAX_ASSIGNMENTS}");
    }
    let result = brute_force_optimal_with(&domain, exec, &PathCache::new())?;
    let doc = OracleDocument {
        metadata: RunMetadata::of(&domain),
        q_root: total_allocation_quality(&domain.root_allocation(), &domain)?,
        q_null: total_allocation_quality(&domain.null_allocation(), &domain)?,
        result,
    };
    write_json(out, &doc)?;
    match doc.result.quality() {
        Some(q) => {
            println!("optimal quality {q:.6} ({})", out.display());
            Ok(ExitCode::SUCCESS)
        }
        None => {
            println!("infeasible: no allocation meets budget {:.3} ({})", domain.time_budget(), out.display());
            Ok(ExitCode::from(EXIT_INFEASIBLE))
        }
    }
}

fn sweep(instance: &Path, alphas: Option<Vec<f64>>, out: &Path, exec: Execution) -> Result<ExitCode> {
    let domain = load(instance, None)?;
    let alphas = alphas.unwrap_or_else(default_alphas);
    let rows = alpha_sweep_with(&domain, &alphas, exec)?;
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    write_sweep_csv(BufWriter::new(file), &rows)?;
    let solved = rows.iter().filter(|r| r.quality.is_some()).count();
    println!("{solved}/{} alphas solved ({})", rows.len(), out.display());
    Ok(if solved == 0 && !rows.is_empty() {
        ExitCode::from(EXIT_INFEASIBLE)
    } else {
        ExitCode::SUCCESS
    })
}

#[allow(clippy::too_many_arguments)]
fn learn(
    data: &Dataset,
    budget: usize,
    seeds: u64,
    strategy: Strategy,
    eval_fraction: f64,
    seed: u64,
    out: &Path,
    model_out: Option<&Path>,
    exec: Execution,
) -> Result<ExitCode> {
    let split = data.split(eval_fraction, seed)?;
    let labels = &split.pool_labels;
    let hyper = GpHyper::defaults_for(data.dim());
    let label = |i: usize, _: &[f64]| Ok(labels[i]);

    let entropy = match strategy {
        Strategy::Entropy | Strategy::Both => Some(active_learn(label, &split.pool, &split.eval, budget, hyper)?),
        Strategy::Uniform => None,
    };
    let seed_list: Vec<u64> = (0..seeds).collect();
    let envelope = match strategy {
        Strategy::Uniform | Strategy::Both => Some(uniform_envelope(label, &split.pool, &split.eval, budget, hyper, &seed_list, exec)?),
        Strategy::Entropy => None,
    };

    let mut curves = Vec::new();
    if let Some(run) = &entropy {
        curves.push(LearningCurve {
            strategy: "entropy",
            seeds: vec![None],
            traces: vec![run.rmse_trace.clone()],
            envelope: None,
        });
    }
    if let Some(env) = &envelope {
        curves.push(LearningCurve {
            strategy: "uniform",
            seeds: seed_list.iter().copied().map(Some).collect(),
            traces: env.traces.clone(),
            envelope: Some(env),
        });
    }
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    write_learning_curve_csv(BufWriter::new(file), &curves)?;

    if let (Some(path), Some(run)) = (model_out, &entropy) {
        write_json(path, &run.model.to_data())?;
    } else if model_out.is_some() {
        bail!("--model-out needs the entropy strategy");
    }

    let last = |v: &[f64]| v.last().copied().unwrap_or(f64::NAN);
    match (&entropy, &envelope) {
        (Some(e), Some(env)) => println!("final rmse: entropy {:.5}, uniform mean {:.5} ({})", last(&e.rmse_trace), last(&env.mean), out.display()),
        (Some(e), None) => println!("final rmse: entropy {:.5} ({})", last(&e.rmse_trace), out.display()),
        (None, Some(env)) => println!("final rmse: uniform mean {:.5} ({})", last(&env.mean), out.display()),
        (None, None) => {}
    }
    Ok(ExitCode::SUCCESS)
}
