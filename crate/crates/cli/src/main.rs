//! Command-line front end: generate contact graphs, run single
//! simulations, drive parameter sweeps, and validate artifact files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use welfare_sim::config::RunConfig;
use welfare_sim::engine::{self, RunResult, WorldState};
use welfare_sim::output;
use welfare_sim::sweep::{self, RunStats, SweepSpec};
use welfare_sim::topology::{self, SmallWorldParams};
use welfare_sim::SimError;

#[derive(Parser)]
#[command(
    name = "welfare-sim",
    version,
    about = "Agent-based simulator of cooperative investment games on small-world networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a small-world contact graph and write its edge list.
    Generate {
        /// Number of nodes.
        #[arg(long)]
        n: usize,
        /// Even per-node degree of the starting ring lattice.
        #[arg(long)]
        k: usize,
        /// Rewiring probability in [0, 1].
        #[arg(long)]
        p: f64,
        #[arg(long)]
        seed: u64,
        /// Output directory for edges.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one simulation from a JSON config.
    Run {
        /// Path to a RunConfig JSON file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for metrics.csv, events.csv, summary.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Expand a sweep spec and run every combination.
    Sweep {
        /// Path to a SweepSpec JSON file.
        #[arg(long)]
        spec: PathBuf,
        /// Output directory for aggregate.csv and per-run artifacts.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; overrides the spec's parallelism.
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Validate a metrics/events/edges/aggregate CSV or summary JSON.
    SchemaCheck {
        #[arg(long)]
        file: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 1 for input validation failures, 2 for everything else.
fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<SimError>() {
        Some(SimError::InvalidParams(_)) | Some(SimError::InvalidConfig(_)) => 1,
        _ => 2,
    }
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Generate { n, k, p, seed, out } => generate(n, k, p, seed, &out),
        Command::Run { config, out } => run(&config, &out),
        Command::Sweep {
            spec,
            out,
            parallelism,
        } => run_sweep(&spec, &out, parallelism),
        Command::SchemaCheck { file } => schema_check(&file),
    }
}

fn write(path: &Path, content: &str) -> anyhow::Result<()> {
    fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

fn generate(n: usize, k: usize, p: f64, seed: u64, out: &Path) -> anyhow::Result<()> {
    let params = SmallWorldParams { n, k, p, seed };
    let graph = topology::generate_small_world(&params)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write(&out.join("edges.csv"), &output::edges_csv(&graph))?;
    let c = topology::clustering_coefficient(&graph);
    let l = topology::average_path_length(&graph)?;
    println!(
        "generated n={n} k={k} p={p} seed={seed}: {} edges, clustering {c:.4}, avg path length {l:.4}",
        graph.edge_count()
    );
    Ok(())
}

fn load_config(path: &Path) -> anyhow::Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(RunConfig::from_json(&text)?)
}

fn write_run_artifacts(
    dir: &Path,
    world: &WorldState,
    result: &RunResult,
    wall_clock_seconds: f64,
) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write(&dir.join("metrics.csv"), &output::metrics_csv(&result.metrics))?;
    write(&dir.join("events.csv"), &output::events_csv(&result.events))?;
    let summary = output::run_summary(world, result, wall_clock_seconds);
    write(&dir.join("summary.json"), &output::summary_json(&summary))?;
    Ok(())
}

fn run(config_path: &Path, out: &Path) -> anyhow::Result<()> {
    let config = load_config(config_path)?;
    let started = Instant::now();
    let (world, result) = engine::run(&config)?;
    let elapsed = started.elapsed().as_secs_f64();
    write_run_artifacts(out, &world, &result, elapsed)?;
    println!(
        "run complete: {} ticks, {} projects, {} betrayals, {:.2}s, artifacts in {}",
        result.metrics.len(),
        result.metrics.iter().map(|m| m.projects_attempted).sum::<u64>(),
        result.metrics.iter().map(|m| m.betrayal_count).sum::<u64>(),
        elapsed,
        out.display()
    );
    Ok(())
}

fn run_sweep(spec_path: &Path, out: &Path, parallelism: Option<usize>) -> anyhow::Result<()> {
    let text =
        fs::read_to_string(spec_path).with_context(|| format!("reading {}", spec_path.display()))?;
    let mut spec = SweepSpec::from_json(&text)?;
    if let Some(threads) = parallelism {
        spec.parallelism = threads;
    }
    let plans = sweep::expand(&spec)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.parallelism.max(1))
        .build()
        .context("building thread pool")?;
    let results: Vec<Result<RunStats, (usize, String)>> = pool.install(|| {
        plans
            .par_iter()
            .map(|plan| {
                let started = Instant::now();
                let (world, result) =
                    engine::run(&plan.config).map_err(|e| (plan.run_id, e.to_string()))?;
                let run_dir = out.join("runs").join(plan.run_id.to_string());
                write_run_artifacts(
                    &run_dir,
                    &world,
                    &result,
                    started.elapsed().as_secs_f64(),
                )
                .map_err(|e| (plan.run_id, format!("{e:#}")))?;
                let tail_ticks = spec.tail.window(result.metrics.len());
                let (window, [b_mean, b_std, a_mean, a_std]) =
                    sweep::tail_stats(&result.metrics, tail_ticks);
                Ok(RunStats {
                    run_id: plan.run_id,
                    seed: plan.seed,
                    settings: plan.settings.clone(),
                    tail_ticks: window,
                    betrayal_rate_mean: b_mean,
                    betrayal_rate_std: b_std,
                    acceptance_rate_mean: a_mean,
                    acceptance_rate_std: a_std,
                })
            })
            .collect()
    });
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(stats) => rows.push(stats),
            Err(failure) => failures.push(failure),
        }
    }
    rows.sort_by_key(|r| r.run_id);
    failures.sort_by_key(|f| f.0);
    let axes: Vec<String> = spec.axes.iter().map(|a| a.path.clone()).collect();
    write(&out.join("aggregate.csv"), &sweep::aggregate_csv(&axes, &rows))?;
    println!(
        "sweep complete: {} runs, {} failed, aggregate in {}",
        plans.len(),
        failures.len(),
        out.join("aggregate.csv").display()
    );
    if !failures.is_empty() {
        for (run_id, message) in &failures {
            eprintln!("run {run_id} failed: {message}");
        }
        anyhow::bail!("{} of {} runs failed", failures.len(), plans.len());
    }
    Ok(())
}

fn schema_check(file: &Path) -> anyhow::Result<()> {
    let text = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let report = output::schema_check(&text)?;
    println!("ok: {} with {} rows", report.kind, report.rows);
    Ok(())
}
