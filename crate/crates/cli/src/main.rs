//! Operator entry point: run design-iteration trials and experiments,
//! re-evaluate generated configurations, aggregate statistics, validate
//! configuration files, and render composite strips.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use flaptune::agents::PolicyKind;
use flaptune::config::{broken_config, parse_config, validate_config, GameConfig, Scenario};
use flaptune::designer::{PromptVariant, API_KEY_ENV};
use flaptune::runner::{
    derive_seed_base, load_trial_record, reevaluate_trial_dir, run_experiment, run_trial,
    DesignerSpec, ExperimentSpec, PolicySpec, TrialSpec, TrialStatus,
};
use flaptune::stats;
use flaptune::traces::{composite_strip, downscale, encode_png};

#[derive(Parser)]
#[command(
    name = "flaptune",
    version,
    about = "Closed-loop difficulty tuning for a configurable Flappy Bird game"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a design-iteration trial (or a full experiment grid with --all).
    Run(RunArgs),
    /// Re-play every configuration of a persisted trial with fresh seeds.
    Reeval(ReevalArgs),
    /// Aggregate re-evaluation scores of one experiment cell into CSV.
    Stats(StatsArgs),
    /// Validate a configuration file and print the report.
    Validate(ValidateArgs),
    /// Play one seeded episode and write its composite strip PNG.
    Render(RenderArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DesignerKind {
    Identity,
    Scripted,
    Llm,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    /// Gap-following heuristic.
    Gap,
    /// Lidar-only heuristic.
    Lidar,
    /// Never flaps.
    Idle,
    /// Subprocess speaking the line protocol (see --external-cmd).
    External,
}

impl PolicyArg {
    fn kind(self) -> PolicyKind {
        match self {
            PolicyArg::Gap => PolicyKind::HeuristicGap,
            PolicyArg::Lidar => PolicyKind::HeuristicLidar,
            PolicyArg::Idle => PolicyKind::AlwaysIdle,
            PolicyArg::External => PolicyKind::External,
        }
    }
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    Scenario::from_str(s)
}

fn parse_variant(s: &str) -> Result<PromptVariant, String> {
    PromptVariant::from_str(s)
}

#[derive(Args)]
struct RunArgs {
    /// Who edits the configuration between iterations.
    #[arg(long, value_enum, default_value = "scripted")]
    designer: DesignerKind,
    /// Broken starting scenario.
    #[arg(long, value_parser = parse_scenario, conflicts_with = "config")]
    scenario: Option<Scenario>,
    /// Starting configuration file (alternative to --scenario).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Feedback handed to the designer.
    #[arg(long, value_parser = parse_variant, default_value = "metrics_text")]
    variant: PromptVariant,
    #[arg(long, value_enum, default_value = "gap")]
    policy: PolicyArg,
    /// Command for --policy external (whitespace-split, no shell).
    #[arg(long)]
    external_cmd: Option<String>,
    /// Designer changes per trial (the trial plays this + 1 configs).
    #[arg(long, default_value_t = 9)]
    iterations: u32,
    /// Episodes per configuration.
    #[arg(long, default_value_t = 5)]
    episodes: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Experiment output directory.
    #[arg(long)]
    out: PathBuf,
    /// OpenAI-compatible endpoint base URL (llm designer).
    #[arg(long, default_value = "https://api.openai.com/v1")]
    endpoint: String,
    #[arg(long, default_value = "gpt-4.1")]
    model: String,
    /// Sampling temperature; omitted from requests when unset.
    #[arg(long)]
    temperature: Option<f64>,
    /// Designer request timeout in seconds.
    #[arg(long, default_value_t = 120)]
    timeout_s: u64,
    /// Integer downscale factor for strip images.
    #[arg(long, default_value_t = 2)]
    image_scale: u32,
    /// Score the designer aims for.
    #[arg(long, default_value_t = 10)]
    target_score: u32,
    /// Sweep all five scenarios instead of one.
    #[arg(long)]
    all: bool,
    /// Trials per (variant, scenario) cell; defaults to 10 with --all, 1 otherwise.
    #[arg(long)]
    trials: Option<u32>,
    /// Parallel trial workers.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct ReevalArgs {
    /// Trial directory produced by `run`.
    #[arg(long)]
    trial: PathBuf,
    /// Fresh episodes per configuration.
    #[arg(long, default_value_t = 50)]
    episodes: u32,
    #[arg(long, value_enum, default_value = "gap")]
    policy: PolicyArg,
    #[arg(long)]
    external_cmd: Option<String>,
}

#[derive(Args)]
struct StatsArgs {
    /// Experiment root directory.
    #[arg(long)]
    exp: PathBuf,
    /// Cell selector, `<variant>/<scenario>`.
    #[arg(long)]
    cell: String,
    #[arg(long, default_value_t = stats::DEFAULT_N_BOOT)]
    n_boot: usize,
    #[arg(long, default_value_t = stats::DEFAULT_LEVEL)]
    level: f64,
    /// CSV output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Configuration file to check.
    path: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long, value_parser = parse_scenario, conflicts_with = "config")]
    scenario: Option<Scenario>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "gap")]
    policy: PolicyArg,
    #[arg(long)]
    external_cmd: Option<String>,
    /// Output PNG path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    image_scale: u32,
}

/// Exit with 2 (usage) for precondition problems, 1 for run failures.
enum CliError {
    Usage(String),
    Run(String),
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Run(e.to_string())
    }
}

fn load_start_config(
    scenario: Option<Scenario>,
    config: &Option<PathBuf>,
) -> Result<(String, GameConfig), CliError> {
    match (scenario, config) {
        (Some(s), None) => Ok((s.name().to_string(), broken_config(s))),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Run(format!("{}: {e}", path.display())))?;
            let cfg = parse_config(&text)
                .map_err(|e| CliError::Run(format!("{}: {e}", path.display())))?;
            Ok(("custom".to_string(), cfg))
        }
        _ => Err(CliError::Usage(
            "exactly one of --scenario or --config is required".to_string(),
        )),
    }
}

fn designer_spec(args: &RunArgs) -> Result<DesignerSpec, CliError> {
    Ok(match args.designer {
        DesignerKind::Identity => DesignerSpec::Identity,
        DesignerKind::Scripted => DesignerSpec::Scripted {
            target_score: args.target_score,
        },
        DesignerKind::Llm => {
            if std::env::var(API_KEY_ENV).is_err() {
                return Err(CliError::Usage(format!(
                    "--designer llm requires the {API_KEY_ENV} environment variable"
                )));
            }
            DesignerSpec::Llm {
                endpoint: args.endpoint.clone(),
                model: args.model.clone(),
                temperature: args.temperature,
                timeout: Duration::from_secs(args.timeout_s),
            }
        }
    })
}

fn policy_spec(policy: PolicyArg, external_cmd: &Option<String>) -> Result<PolicySpec, CliError> {
    if matches!(policy, PolicyArg::External) && external_cmd.is_none() {
        return Err(CliError::Usage(
            "--policy external requires --external-cmd".to_string(),
        ));
    }
    Ok(PolicySpec {
        kind: policy.kind(),
        external_cmd: external_cmd.clone(),
    })
}

fn print_trial_summary(trial_dir: &Path) -> Result<(), CliError> {
    let record = load_trial_record(trial_dir)?;
    for it in &record.iterations {
        let scores: Vec<String> = it.traces.iter().map(|t| t.score.to_string()).collect();
        let samples: Vec<f64> = it.traces.iter().map(|t| t.score as f64).collect();
        let iqm = stats::iqm(&samples)
            .map(|v| format!("{v:.2}"))
            .unwrap_or_default();
        println!(
            "{} iter {:02} scores=[{}] iqm={}",
            record.meta.trial_id,
            it.index,
            scores.join(","),
            iqm
        );
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let designer = designer_spec(&args)?;
    let policy = policy_spec(args.policy, &args.external_cmd)?;

    // Custom start configs bypass the scenario grid.
    if args.config.is_some() {
        let (label, start) = load_start_config(None, &args.config)?;
        let trial_id = format!("{}/{}/trial_000", args.variant.name(), label);
        let trial_dir = args.out.join(&trial_id);
        let spec = TrialSpec {
            trial_id: trial_id.clone(),
            scenario_label: label,
            variant: args.variant,
            episodes_per_iter: args.episodes,
            design_iterations: args.iterations,
            seed_base: derive_seed_base(args.seed, &trial_id),
            image_scale: args.image_scale,
        };
        let mut designer = designer.build()?;
        let mut policy = policy.build()?;
        run_trial(
            &start,
            designer.as_mut(),
            policy.as_mut(),
            &spec,
            Some(&trial_dir),
        )?;
        print_trial_summary(&trial_dir)?;
        return Ok(());
    }

    let scenarios = if args.all {
        Scenario::ALL.to_vec()
    } else {
        match args.scenario {
            Some(s) => vec![s],
            None => {
                return Err(CliError::Usage(
                    "exactly one of --scenario or --config is required".to_string(),
                ))
            }
        }
    };
    let trials_per_cell = args.trials.unwrap_or(if args.all { 10 } else { 1 });
    let spec = ExperimentSpec {
        variants: vec![args.variant],
        scenarios,
        trials_per_cell,
        episodes_per_iter: args.episodes,
        design_iterations: args.iterations,
        seed: args.seed,
        image_scale: args.image_scale,
        designer,
        policy,
        jobs: args.jobs,
        verbose: true,
    };
    let manifest = run_experiment(&args.out, &spec)?;
    let mut failed = 0;
    for trial in &manifest.trials {
        match trial.status {
            TrialStatus::Completed => print_trial_summary(&args.out.join(&trial.path))?,
            _ => {
                failed += 1;
                eprintln!(
                    "trial {} failed: {}",
                    trial.id,
                    trial.error.as_deref().unwrap_or("unknown")
                );
            }
        }
    }
    if failed > 0 {
        return Err(CliError::Run(format!("{failed} trial(s) failed")));
    }
    Ok(())
}

fn cmd_reeval(args: ReevalArgs) -> Result<(), CliError> {
    let policy = policy_spec(args.policy, &args.external_cmd)?;
    let mut policy = policy.build()?;
    let per_iter = reevaluate_trial_dir(&args.trial, policy.as_mut(), args.episodes)?;
    for (i, scores) in per_iter.iter().enumerate() {
        let samples: Vec<f64> = scores.iter().map(|&s| s as f64).collect();
        let iqm = stats::iqm(&samples)?;
        println!("iter {i:02} episodes={} iqm={iqm:.2}", scores.len());
    }
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> Result<(), CliError> {
    let (variant, scenario) = args.cell.split_once('/').ok_or_else(|| {
        CliError::Usage("--cell must look like <variant>/<scenario>".to_string())
    })?;
    let summaries = stats::aggregate(&args.exp, variant, scenario, args.n_boot, args.level)?;
    let csv = stats::to_csv(&summaries);
    match &args.out {
        Some(path) => std::fs::write(path, csv)
            .map_err(|e| CliError::Run(format!("{}: {e}", path.display())))?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.path)
        .map_err(|e| CliError::Run(format!("{}: {e}", args.path.display())))?;
    let cfg = parse_config(&text).map_err(|e| CliError::Run(e.to_string()))?;
    let report = validate_config(&cfg);
    if report.valid {
        println!("valid");
        Ok(())
    } else {
        Err(CliError::Run(format!("{report}")))
    }
}

fn cmd_render(args: RenderArgs) -> Result<(), CliError> {
    let (_, cfg) = load_start_config(args.scenario, &args.config)?;
    let policy = policy_spec(args.policy, &args.external_cmd)?;
    let mut policy = policy.build()?;
    let trace = flaptune::sim::run_episode(&cfg, policy.as_mut(), args.seed)?;
    let strip = downscale(&composite_strip(&trace, &cfg), args.image_scale);
    let png = encode_png(&strip)?;
    std::fs::write(&args.out, png)
        .map_err(|e| CliError::Run(format!("{}: {e}", args.out.display())))?;
    println!(
        "episode seed={} score={} duration={:.1}s termination={} -> {}",
        trace.seed,
        trace.score,
        trace.duration_s,
        trace.termination,
        args.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Reeval(args) => cmd_reeval(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Render(args) => cmd_render(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
    }
}
