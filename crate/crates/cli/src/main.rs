//! `ema-rl` command-line interface.
//!
//! Exit codes: 0 success, 1 user error (bad flags, configs or input files),
//! 2 internal error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "ema-rl",
    about = "Schedule stress self-report prompts from wearable PPG with context-aware active reinforcement learning",
    disable_version_flag = true
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    /// Print name, version and file schema versions as JSON.
    #[arg(long)]
    pub version: bool,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Master seed; overrides the experiment and cohort seeds of the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// TOML experiment config. Missing keys take desk-scale defaults.
    #[arg(long, global = true, conflicts_with = "paper_scale")]
    pub config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, env = "EMA_RL_OUT", default_value = "out")]
    pub out: PathBuf,

    /// Omit wall-clock metadata so repeated runs are byte-identical.
    #[arg(long, global = true)]
    pub deterministic: bool,

    /// Start from paper-scale defaults (34 subjects, 20 days, 100 replications).
    #[arg(long, global = true)]
    pub paper_scale: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a cohort and write one dataset file per subject.
    SynthCohort(SynthArgs),
    /// Compute HRV and context features for dataset records with raw PPG.
    ExtractFeatures(ExtractArgs),
    /// Train a stress classifier on labeled feature records.
    TrainDetector(TrainDetectorArgs),
    /// Pretrain the context-aware scheduling agent on a simulated cohort.
    TrainAgent,
    /// Offline study: statistical collection, then active personalization.
    RunOffline,
    /// Online study: real-time agent decisions with periodic retraining.
    RunOnline,
    /// Queries each policy needs to reach each recall level.
    ComparePolicies,
    /// Leave-one-subject-out plain versus personalized models.
    Personalize(PersonalizeArgs),
    /// Recompute the metrics of a run from its decision log.
    ReplayLog(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of subjects (overrides the config).
    #[arg(long)]
    pub subjects: Option<usize>,
    /// Study days per subject (overrides the config).
    #[arg(long)]
    pub days: Option<usize>,
    /// Omit raw PPG samples and write features only.
    #[arg(long)]
    pub no_raw: bool,
    /// Attach self-reports collected by the statistical policy.
    #[arg(long, value_enum, default_value_t = SynthLabels::Collected)]
    pub labels: SynthLabels,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthLabels {
    None,
    Collected,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Dataset file or directory of `.jsonl` files.
    #[arg(long)]
    pub input: PathBuf,
    /// Drop raw samples from the output records.
    #[arg(long)]
    pub drop_raw: bool,
}

#[derive(Debug, Args)]
pub struct TrainDetectorArgs {
    /// Dataset file or directory of `.jsonl` files with features and labels.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub feature_set: Option<FeatureSetArg>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FeatureSetArg {
    PpgOnly,
    PpgContext,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    BaggedTrees,
    BoostedTrees,
    LinearMargin,
}

#[derive(Debug, Args)]
pub struct PersonalizeArgs {
    /// Label source (overrides the config).
    #[arg(long, value_enum)]
    pub labels: Option<LabelsArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LabelsArg {
    Oracle,
    Collected,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Decision log written by `run-offline` or `run-online`.
    #[arg(long)]
    pub log: PathBuf,
}

fn version_json() -> serde_json::Value {
    use ema_rl::harness::{CURVES_SCHEMA_VERSION, LOG_SCHEMA_VERSION, METRICS_SCHEMA_VERSION};
    use ema_rl::storage::{ARTIFACT_FORMAT_VERSION, DATASET_SCHEMA_VERSION};
    serde_json::json!({
        "name": "ema-rl",
        "version": env!("CARGO_PKG_VERSION"),
        "schemas": {
            "dataset": DATASET_SCHEMA_VERSION,
            "decision_log": LOG_SCHEMA_VERSION,
            "metrics": METRICS_SCHEMA_VERSION,
            "curves": CURVES_SCHEMA_VERSION,
            "artifact": ARTIFACT_FORMAT_VERSION,
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("EMA_RL_LOG", "info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    if cli.version {
        println!("{}", version_json());
        return ExitCode::SUCCESS;
    }
    let Some(command) = &cli.command else {
        eprintln!("error: a subcommand is required\n\nRun `ema-rl --help` for usage.");
        return ExitCode::from(1);
    };
    match commands::run(&cli.global, command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_user_error() { 1 } else { 2 })
        }
    }
}
