//! `hostprint`: extract session features from captures, train and evaluate
//! classifiers, and build perturbed test sets.
//!
//! Exit status is 0 on success, 1 on a data error and 2 on a usage error.

mod commands;
mod io;
mod options;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{
    EvaluateArgs, ExtractArgs, FeaturesArgs, PerturbArgs, PredictArgs, StatsArgs, SynthArgs, TrainArgs,
};
use crate::options::ConfigFile;

#[derive(Parser, Debug)]
#[command(name = "hostprint", version)]
#[command(about = "Identify OS, browser and application behind encrypted HTTPS sessions")]
struct Cli {
    /// TOML file with [capture], [model], [evaluate] and [cipher] sections; flags take precedence
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads [default: one per core]
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split captures into sessions and write their combined features as CSV
    Extract(ExtractArgs),
    /// Grid-search a learner on a dataset CSV and write the fitted model
    Train(TrainArgs),
    /// Repeated 70/30 evaluation; writes a JSON report and plot tables
    Evaluate(EvaluateArgs),
    /// Classify the rows of a dataset CSV with a trained model
    Predict(PredictArgs),
    /// Write a perturbed copy of a dataset (cipher deltas or VPN merging)
    Perturb(PerturbArgs),
    /// Print the feature dictionary or one feature set's columns
    Features(FeaturesArgs),
    /// Print the class distribution of a dataset CSV
    Stats(StatsArgs),
    /// Write a synthetic labeled capture and its label rules
    Synth(SynthArgs),
}

/// A request that is well-formed for clap but still unusable.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = match &cli.config {
        Some(path) => ConfigFile::load(path).map_err(|e| usage(format!("{e:#}")))?,
        None => ConfigFile::default(),
    };
    if let Some(jobs) = cli.jobs.or(config.jobs) {
        if jobs == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    match cli.command {
        Command::Extract(args) => commands::extract(args, config),
        Command::Train(args) => commands::train(args, config),
        Command::Evaluate(args) => commands::evaluate(args, config),
        Command::Predict(args) => commands::predict(args),
        Command::Perturb(args) => commands::perturb(args, config),
        Command::Features(args) => commands::features(args),
        Command::Stats(args) => commands::stats(args, config),
        Command::Synth(args) => commands::synth(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e:#}\n\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
