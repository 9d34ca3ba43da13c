//! Command-line harness: validate scenarios, run single trials, run seeded
//! batches with metrics, and recompute metrics from a trials CSV.
//!
//! Exit codes: 0 success, 1 usage error, 2 validation failure, 3 runtime
//! failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use demoplan::harness::{
    compute_metrics, compute_metrics_from_rows, emit_report, load_scenario, parse_trials_csv,
    report_json, run_batch, run_trial, HarnessError, ReportFormat, Scenario, TrialOptions,
};
use demoplan::seeded::trial_seed;
use demoplan::{Ablation, PlanMode, TrialRun};

#[derive(Parser)]
#[command(name = "demoplan", version, about = "Demonstration-guided manipulation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Mimic,
    Constrained,
    SkillTransfer,
    TextOnly,
}

impl From<ModeArg> for PlanMode {
    fn from(mode: ModeArg) -> Self {
        match mode {
            ModeArg::Mimic => PlanMode::Mimic,
            ModeArg::Constrained => PlanMode::Constrained,
            ModeArg::SkillTransfer => PlanMode::SkillTransfer,
            ModeArg::TextOnly => PlanMode::TextOnly,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum AblateArg {
    Fdp,
    Path,
    Parsing,
}

impl From<AblateArg> for Ablation {
    fn from(ablate: AblateArg) -> Self {
        match ablate {
            AblateArg::Fdp => Ablation::Fdp,
            AblateArg::Path => Ablation::Path,
            AblateArg::Parsing => Ablation::Parsing,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
    Both,
}

impl From<FormatArg> for ReportFormat {
    fn from(format: FormatArg) -> Self {
        match format {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Both => ReportFormat::Both,
        }
    }
}

#[derive(Args)]
struct TrialArgs {
    /// Scenario file to run.
    #[arg(long)]
    scenario: PathBuf,
    /// Base seed; trial i of a batch derives its own seed from (seed, i).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the scenario's planning mode.
    #[arg(long)]
    mode: Option<ModeArg>,
    /// Swap out a pipeline component.
    #[arg(long)]
    ablate: Option<AblateArg>,
    /// Override the rollout noise amplitude (meters).
    #[arg(long)]
    noise: Option<f64>,
}

impl TrialArgs {
    fn options(&self) -> TrialOptions {
        TrialOptions {
            ablation: self.ablate.map(Ablation::from).unwrap_or(Ablation::None),
            noise: self.noise,
            mode: self.mode.map(PlanMode::from),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Lint a scenario file and report diagnostics.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Run a single trial with a verbose per-subtask log.
    Run {
        #[command(flatten)]
        trial: TrialArgs,
        /// Write run.json (the full trial record) into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run N seeded trials and emit the metrics report.
    Batch {
        #[command(flatten)]
        trial: TrialArgs,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// Output directory for report.json / trials.csv.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Both)]
        format: FormatArg,
    },
    /// Recompute the metrics report from an existing trials.csv.
    Metrics {
        /// Path to a trials.csv produced by `batch`.
        #[arg(long = "in")]
        input: PathBuf,
        /// Scenario the trials came from (provides the subtask count).
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Subtask count override when no scenario file is at hand.
        #[arg(long)]
        subtasks: Option<usize>,
        /// Write report.json here instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum AppError {
    Validation(String),
    Runtime(String),
}

impl From<HarnessError> for AppError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Parse { .. }
            | HarnessError::MissingFile { .. }
            | HarnessError::Validation(_)
            | HarnessError::InsufficientData(_)
            | HarnessError::Keyframe(_)
            | HarnessError::Plan(_) => AppError::Validation(e.to_string()),
            HarnessError::Io { .. } => AppError::Runtime(e.to_string()),
        }
    }
}

fn config_echo(scenario: &Scenario, trial: &TrialArgs, trials: usize) -> serde_json::Value {
    let options = trial.options();
    serde_json::json!({
        "scenario": scenario.name,
        "scenario_path": scenario.path.display().to_string(),
        "trials": trials,
        "seed": trial.seed,
        "mode": options.mode.unwrap_or(scenario.mode),
        "ablation": options.ablation,
        "noise": options.noise.unwrap_or(scenario.params.gen.noise),
        "placement_jitter": scenario.placement_jitter,
        "params": scenario.params,
    })
}

fn print_trial(run: &TrialRun, scenario: &Scenario) {
    let result = &run.result;
    println!("scenario: {} (seed {})", scenario.name, result.seed);
    for (i, outcome) in result.subtask_outcomes.iter().enumerate() {
        let status = if outcome.passed { "pass" } else { "FAIL" };
        let mut line = format!("  [{i}] {status}  {}", outcome.desc);
        if let Some(reason) = outcome.reason {
            line.push_str(&format!("  ({})", reason.name()));
        }
        if outcome.replans > 0 {
            line.push_str(&format!("  [replans: {}]", outcome.replans));
        }
        println!("{line}");
        if let Some(detail) = &outcome.detail {
            println!("        {detail}");
        }
    }
    println!(
        "result: {} — {}/{} subtasks, {} replans, {} collision events",
        if result.success { "success" } else { "failure" },
        result.subtasks_passed,
        result.subtask_outcomes.len(),
        result.replans_used,
        result.collision_events,
    );
}

fn cmd_validate(path: &Path) -> Result<(), AppError> {
    let scenario = load_scenario(path)?;
    println!(
        "{}: ok — mode {}, {} subtasks expected, {} objects, {} regions, {} obstacle points",
        scenario.name,
        scenario.mode,
        scenario.expected_subtasks,
        scenario.scene.objects.len(),
        scenario.scene.regions.len(),
        scenario.scene.obstacles.len(),
    );
    if let Some(stream) = &scenario.stream {
        println!(
            "demonstration: {} frames, {} keyframe labels",
            stream.len(),
            scenario.demonstration.as_ref().map(|d| d.keyframe_labels.len()).unwrap_or(0),
        );
    }
    Ok(())
}

fn cmd_run(trial: &TrialArgs, out: Option<&Path>) -> Result<(), AppError> {
    let scenario = load_scenario(&trial.scenario)?;
    let run = run_trial(&scenario, trial_seed(trial.seed, 0), &trial.options(), None);
    print_trial(&run, &scenario);
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)
            .map_err(|e| AppError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        let path = dir.join("run.json");
        let mut body = serde_json::to_string_pretty(&run).expect("serializable run");
        body.push('\n');
        std::fs::write(&path, body)
            .map_err(|e| AppError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_batch(
    trial: &TrialArgs,
    trials: usize,
    out: &Path,
    format: ReportFormat,
) -> Result<(), AppError> {
    let scenario = load_scenario(&trial.scenario)?;
    let runs = run_batch(&scenario, trials, trial.seed, &trial.options())?;
    let results: Vec<_> = runs.into_iter().map(|r| r.result).collect();
    let mut report = compute_metrics(&results, scenario.expected_subtasks)?;
    report.config = config_echo(&scenario, trial, trials);
    let written = emit_report(&report, out, format)?;
    println!("{}: N={} TSR={} SSR={}", scenario.name, report.trials, report.tsr, report.ssr);
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_metrics(
    input: &Path,
    scenario: Option<&Path>,
    subtasks: Option<usize>,
    out: Option<&Path>,
) -> Result<(), AppError> {
    let expected = match (scenario, subtasks) {
        (_, Some(m)) => m,
        (Some(path), None) => load_scenario(path)?.expected_subtasks,
        (None, None) => {
            return Err(AppError::Validation(
                "metrics needs --scenario or --subtasks to know the task size".into(),
            ))
        }
    };
    let text = std::fs::read_to_string(input)
        .map_err(|e| AppError::Runtime(format!("cannot read {}: {e}", input.display())))?;
    let rows = parse_trials_csv(&text)?;
    let mut report = compute_metrics_from_rows(rows, expected)?;
    report.config = serde_json::json!({
        "source": input.display().to_string(),
        "expected_subtasks": expected,
    });
    match out {
        Some(dir) => {
            let written = emit_report(&report, dir, ReportFormat::Json)?;
            println!("TSR={} SSR={}", report.tsr, report.ssr);
            for path in written {
                println!("wrote {}", path.display());
            }
        }
        None => print!("{}", report_json(&report)),
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Validate { scenario } => cmd_validate(&scenario),
        Command::Run { trial, out } => cmd_run(&trial, out.as_deref()),
        Command::Batch { trial, trials, out, format } => {
            if trials < 1 {
                return Err(AppError::Validation("--trials must be at least 1".into()));
            }
            cmd_batch(&trial, trials, &out, format.into())
        }
        Command::Metrics { input, scenario, subtasks, out } => {
            cmd_metrics(&input, scenario.as_deref(), subtasks, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems exit 1; clap's own help/version output exits 0.
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Validation(message)) => {
            eprintln!("validation error: {message}");
            ExitCode::from(2)
        }
        Err(AppError::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(3)
        }
    }
}
