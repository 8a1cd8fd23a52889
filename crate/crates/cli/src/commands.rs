use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use merge_planner::sim::{batch_run, run, synth_scenario, BatchSummary, Outcome, Scenario, SimResult, Template};
use merge_planner::validation::validate_solver;
use merge_planner::RunConfig;
use serde::Serialize;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_FAILED: u8 = 2;
pub const EXIT_TIMEOUT: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "merge-planner", version, about = "POMDP planner for on-ramp highway merging")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one closed-loop simulation.
    Simulate(SimulateArgs),
    /// Run a batch of simulations over consecutive seeds.
    Batch(BatchArgs),
    /// Write a synthetic scenario and its map.
    Synth(SynthArgs),
    /// Check the solver against exact references.
    ValidateSolver(ValidateArgs),
    /// Print the effective configuration.
    DumpConfig(DumpArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Planning episodes per step.
    #[arg(long)]
    episodes: Option<usize>,
}

#[derive(Debug, Args)]
struct Source {
    /// Scenario file.
    #[arg(long, conflicts_with = "template")]
    scenario: Option<PathBuf>,
    /// Lane map overriding the one named by the scenario.
    #[arg(long, requires = "scenario")]
    map: Option<PathBuf>,
    /// Synthetic template, e.g. `platoon` or `fast_adjacent(30,15,20.5,200)`.
    #[arg(long)]
    template: Option<String>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    source: Source,
    /// Print the summary JSON to standard output.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct BatchArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    runs: Option<usize>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Required fraction of merged runs for a zero exit status.
    #[arg(long, default_value_t = 0.0)]
    min_success: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    template: String,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 5000)]
    episodes: usize,
    /// Closed-loop evaluation episodes.
    #[arg(long, default_value_t = 1000)]
    rollouts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct DumpArgs {
    #[arg(long)]
    config: Option<PathBuf>,
}

pub fn execute(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Batch(args) => batch(args),
        Command::Synth(args) => synth(args),
        Command::ValidateSolver(args) => validate(args),
        Command::DumpConfig(args) => {
            print!("{}", load_config(args.config.as_deref())?.dump());
            Ok(EXIT_OK)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    Ok(match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    })
}

/// Configuration with command-line overrides applied.
fn resolve(common: &Common) -> Result<RunConfig> {
    let mut cfg = load_config(common.config.as_deref())?;
    if let Some(out) = &common.out {
        cfg.sim.out_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.sim.seed = seed;
    }
    if let Some(episodes) = common.episodes {
        cfg.solver.episodes = episodes;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_template(name: &str) -> Result<Template> {
    name.parse::<Template>().map_err(anyhow::Error::from)
}

fn load_scenario(source: &Source, cfg: &RunConfig) -> Result<Scenario> {
    let model = cfg.model_config();
    let scenario_path = source.scenario.clone().or_else(|| cfg.sim.scenario.clone());
    if let Some(path) = scenario_path {
        let map = source.map.clone().or_else(|| cfg.sim.map.clone());
        return Scenario::load(&path, map.as_deref(), &model)
            .with_context(|| format!("loading scenario {}", path.display()));
    }
    let Some(name) = &source.template else {
        bail!("either --scenario or --template is required");
    };
    let template = parse_template(name)?;
    Ok(synth_scenario(&template, cfg.sim.seed, &model)?.build(&model)?)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_trajectory(path: &Path, result: &SimResult) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
    result.write_csv(file).with_context(|| format!("writing {}", path.display()))
}

fn outcome_code(outcome: Outcome) -> u8 {
    match outcome {
        Outcome::Merged => EXIT_OK,
        Outcome::Timeout => EXIT_TIMEOUT,
        Outcome::Collision | Outcome::Bounds | Outcome::Overrun | Outcome::Failure => EXIT_FAILED,
    }
}

#[derive(Serialize)]
struct RunReport<'a> {
    label: &'a str,
    seed: u64,
    outcome: Outcome,
    merge_time: Option<u32>,
    min_gap: Option<f64>,
    mean_accel: Option<f64>,
    steps: usize,
    failure: Option<&'a str>,
}

fn simulate(args: SimulateArgs) -> Result<u8> {
    let cfg = resolve(&args.common)?;
    let scenario = load_scenario(&args.source, &cfg)?;
    let result = run(&scenario, &cfg.solver, &cfg.model_config(), cfg.sim.seed)?;
    let out = &cfg.sim.out_dir;
    create_dir(out)?;
    write_trajectory(&out.join("trajectory.csv"), &result)?;
    let report = RunReport {
        label: &result.label,
        seed: result.seed,
        outcome: result.outcome,
        merge_time: result.merge_time,
        min_gap: result.min_gap,
        mean_accel: result.mean_accel(),
        steps: result.steps.len(),
        failure: result.failure.as_deref(),
    };
    let json = serde_json::to_string_pretty(&report)?;
    write_file(&out.join("summary.json"), &json)?;
    if args.json {
        println!("{json}");
    } else {
        eprintln!(
            "{}: {} after {} steps",
            result.label,
            result.outcome.name(),
            result.steps.len()
        );
    }
    Ok(outcome_code(result.outcome))
}

fn batch(args: BatchArgs) -> Result<u8> {
    let mut cfg = resolve(&args.common)?;
    if let Some(runs) = args.runs {
        cfg.sim.runs = runs;
    }
    if let Some(jobs) = args.jobs {
        cfg.sim.jobs = jobs;
    }
    cfg.validate()?;
    if !(0.0..=1.0).contains(&args.min_success) {
        bail!("--min-success must lie in [0, 1]");
    }
    let scenario = load_scenario(&args.source, &cfg)?;
    let (summary, results) = batch_run(
        &scenario,
        cfg.sim.runs,
        cfg.sim.seed,
        &cfg.solver,
        &cfg.model_config(),
        cfg.sim.jobs,
    )?;
    let out = &cfg.sim.out_dir;
    create_dir(out)?;
    for r in &results {
        write_trajectory(&out.join(format!("run_{}.csv", r.seed)), r)?;
    }
    let json = summary.to_json();
    write_file(&out.join("summary.json"), &json)?;
    if args.json {
        println!("{json}");
    } else {
        print_batch(&summary);
    }
    Ok(if summary.success_rate >= args.min_success {
        EXIT_OK
    } else {
        EXIT_FAILED
    })
}

fn print_batch(summary: &BatchSummary) {
    eprintln!(
        "{}: {}/{} merged, {} collisions",
        summary.label, summary.merged, summary.runs, summary.collisions
    );
    if let Some(t) = &summary.merge_time {
        eprintln!("merge time min/median/max: {} / {} / {}", t.min, t.median, t.max);
    }
}

fn synth(args: SynthArgs) -> Result<u8> {
    let template = parse_template(&args.template)?;
    let cfg = resolve(&args.common)?;
    let model = cfg.model_config();
    let output = synth_scenario(&template, cfg.sim.seed, &model)?;
    output.build(&model)?;
    let out = &cfg.sim.out_dir;
    create_dir(out)?;
    write_file(&out.join(&output.scenario.map), &output.map.to_json())?;
    let scenario_path = out.join("scenario.json");
    write_file(&scenario_path, &output.scenario.to_json())?;
    eprintln!("wrote {}", scenario_path.display());
    Ok(EXIT_OK)
}

fn validate(args: ValidateArgs) -> Result<u8> {
    let report = validate_solver(args.episodes, args.rollouts, args.seed);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report.checks)?);
    } else {
        for c in &report.checks {
            println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
    }
    Ok(if report.all_passed() { EXIT_OK } else { EXIT_FAILED })
}
