//! Command-line front end: build the models, generate or ingest gaits, run
//! episodes, optimize interface impedances and compare harness layouts.

pub mod commands;
pub mod config;
pub mod plot;
pub mod report;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use exoharness::exec::ExecutionMode;
use exoharness::harness::HarnessConfig;

use commands::{GaitOverrides, OptimizeOptions};
use config::{Scenario, ScenarioConfig};

#[derive(Debug, Parser)]
#[command(name = "exoharness", version, about = "Harness-layout simulation and interface impedance optimization")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Scenario file (JSON); defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed; every random stream is derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for episode evaluations (1 runs sequentially).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Harness layout code such as "[3 3 2]", overriding the scenario.
    #[arg(long, global = true)]
    pub preset: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one episode with the scenario impedances.
    Simulate,
    /// Optimize the interface impedances of the scenario layout.
    Optimize(OptimizeArgs),
    /// Optimize several layouts on the same gait and rank them.
    Compare(CompareArgs),
    /// Write a synthetic gait CSV.
    GenGait(GenGaitArgs),
    /// Check a scenario and print it fully resolved.
    ValidateConfig,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Problem file (JSON) replacing the scenario's optimization settings.
    #[arg(long)]
    pub problem: Option<PathBuf>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub starts: Option<usize>,
    /// Evaluation cache file (default: evaluations.cache in the output directory).
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Stop after this many new evaluations; rerun to resume.
    #[arg(long)]
    pub max_new_evaluations: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Layout codes to compare (default: the three presets).
    #[arg(long, num_args = 1..)]
    pub configs: Vec<String>,
    #[command(flatten)]
    pub optimize: OptimizeArgs,
}

#[derive(Debug, Args)]
pub struct GenGaitArgs {
    /// Output CSV (default: gait.csv in the output directory).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Steps per minute.
    #[arg(long)]
    pub cadence: Option<f64>,
    #[arg(long)]
    pub variability: Option<f64>,
    /// Samples per second.
    #[arg(long)]
    pub sample_rate: Option<f64>,
}

fn load_scenario(global: &GlobalArgs) -> Result<Scenario> {
    let config = match &global.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(code) = &global.preset {
        HarnessConfig::from_code(code).with_context(|| format!("--preset {code}"))?;
    }
    Scenario::resolve(config, global.seed, global.preset.as_deref())
}

fn apply_problem(scenario: &mut Scenario, args: &OptimizeArgs) -> Result<()> {
    if let Some(p) = &args.problem {
        let text = std::fs::read_to_string(p).with_context(|| format!("cannot read problem file {}", p.display()))?;
        scenario.config.optimization =
            serde_json::from_str(&text).with_context(|| format!("invalid problem file {}", p.display()))?;
    }
    let solver = &mut scenario.config.optimization.solver;
    solver.budget = args.budget.unwrap_or(solver.budget);
    solver.starts = args.starts.unwrap_or(solver.starts);
    let o = &scenario.config.optimization;
    o.metrics.validate()?;
    o.bounds.validate()?;
    o.solver.validate()?;
    if o.solver.budget < o.solver.starts {
        anyhow::bail!("budget ({}) must be at least the number of starts ({})", o.solver.budget, o.solver.starts);
    }
    Ok(())
}

fn execution_mode(jobs: Option<usize>) -> ExecutionMode {
    match jobs {
        Some(1) => ExecutionMode::Sequential,
        _ => ExecutionMode::Parallel,
    }
}

fn optimize_options(args: &OptimizeArgs, jobs: Option<usize>) -> OptimizeOptions {
    OptimizeOptions { cache: args.cache.clone(), max_new_evaluations: args.max_new_evaluations, mode: execution_mode(jobs) }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    let mut scenario = load_scenario(g)?;
    let out = scenario.output_dir(g.out.as_deref());
    match &cli.command {
        Command::Simulate => {
            let m = commands::simulate(&scenario, &out)?;
            println!("harness {}  lambda {:.6e}  max distance {:.4} m", scenario.harness.code, m.cost, m.max_distance);
            println!("{}", commands::interpret_constraint(&m));
            println!("outputs written to {}", out.display());
        }
        Command::Optimize(args) => {
            apply_problem(&mut scenario, args)?;
            let o = commands::optimize_scenario(&scenario, &optimize_options(args, g.jobs), &out)?;
            let r = &o.result;
            println!(
                "harness {}  lambda {:.6e} (anchor {:.6e})  feasible {}  evaluations {} ({} unique)",
                r.harness, r.lambda, r.anchor_lambda, r.feasible, r.evaluations, r.unique_evaluations
            );
            println!("{}", commands::interpret_constraint(&o.metrics));
            println!("outputs written to {}", out.display());
        }
        Command::Compare(args) => {
            apply_problem(&mut scenario, &args.optimize)?;
            let codes: Vec<String> = if args.configs.is_empty() {
                HarnessConfig::PRESET_CODES.iter().map(|c| c.to_string()).collect()
            } else {
                args.configs.clone()
            };
            let report = commands::compare(&scenario, &codes, &optimize_options(&args.optimize, g.jobs), &out)?;
            print!("{}", report.table());
            println!("outputs written to {}", out.display());
        }
        Command::GenGait(args) => {
            let path = args.output.clone().unwrap_or_else(|| out.join("gait.csv"));
            let overrides = GaitOverrides { cadence: args.cadence, variability: args.variability, sample_rate: args.sample_rate };
            commands::gen_gait(&scenario, &overrides, &path)?;
            println!("gait written to {}", path.display());
        }
        Command::ValidateConfig => {
            scenario.prepare()?;
            scenario.impedances()?;
            let provenance = config::Provenance::new("validate-config", &scenario);
            println!("{}", serde_json::to_string_pretty(&provenance.scenario)?);
            eprintln!("scenario is valid");
        }
    }
    Ok(())
}

/// Runs a parsed command, inside a thread pool of `--jobs` workers when given.
pub fn run(cli: Cli) -> Result<()> {
    #[cfg(feature = "parallel")]
    if let Some(n) = cli.global.jobs.filter(|&n| n > 1) {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().context("cannot start the worker pool")?;
        return pool.install(|| dispatch(&cli));
    }
    #[cfg(not(feature = "parallel"))]
    if cli.global.jobs.is_some_and(|n| n > 1) {
        log::warn!("built without the parallel feature; --jobs is ignored");
    }
    if cli.global.jobs == Some(0) {
        anyhow::bail!("--jobs must be at least 1");
    }
    dispatch(&cli)
}
