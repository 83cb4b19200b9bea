//! `bikedet`: synthesize scenes, extract training features, train fusers,
//! run detection, score it and time it.

mod commands;
mod config;
mod scenes;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "bikedet",
    version,
    about = "Bicycle detection in low-resolution traffic video"
)]
struct Cli {
    /// TOML config file; flags given here override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render synthetic scenes with ground truth.
    Synth(SynthArgs),
    /// Dump labelled per-region features for training.
    Features(FeaturesArgs),
    /// Fit an SVM or a cascade to a feature corpus.
    Train(TrainArgs),
    /// Run the detector and write detection records.
    Detect(DetectArgs),
    /// Score detection records against ground truth.
    Eval(EvalArgs),
    /// Time the detector on frames held in memory.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// sunny, foggy, rainy, all (the 20 standard scenes) or training.
    #[arg(long)]
    pub profile: Option<String>,
    /// Only the scene with this name.
    #[arg(long)]
    pub scene: Option<String>,
    /// Output directory; one subdirectory per scene.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    /// Scene or suite directory, or a .y4m file.
    #[arg(long = "in", value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Truth CSV or directory; defaults to each scene's truth.csv.
    #[arg(long, value_name = "PATH")]
    pub truth: Option<PathBuf>,
    /// Feature CSV to write.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// svm or cascade.
    #[arg(long)]
    pub method: Option<String>,
    /// Feature CSV(s) from `features`.
    #[arg(long, value_name = "FILE", num_args = 1..)]
    pub corpus: Vec<PathBuf>,
    /// Model file to write.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// SVM L2 penalty.
    #[arg(long)]
    pub regularization: Option<f64>,
    /// Fraction of surviving positives each cascade stage keeps.
    #[arg(long)]
    pub per_stage_tpr: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Scene or suite directory, or a .y4m file.
    #[arg(long = "in", value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Model file from `train`.
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Output directory for records.csv and trails.csv.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Also write cleaned foreground masks with region boxes.
    #[arg(long)]
    pub masks: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// records.csv, or a directory from `detect`.
    #[arg(long, value_name = "PATH")]
    pub records: Option<PathBuf>,
    /// truth.csv, or a scene or suite directory.
    #[arg(long, value_name = "PATH")]
    pub truth: Option<PathBuf>,
    /// Report every threshold of the sweep instead of the configured one.
    #[arg(long)]
    pub sweep: bool,
    /// Confidence threshold for a single report.
    #[arg(long)]
    pub t_cof: Option<f64>,
    /// Mean IoU a record needs to cover a truth track.
    #[arg(long)]
    pub overlap_min: Option<f64>,
    /// Scene length in frames, when no frames sit next to the truth file.
    #[arg(long)]
    pub length: Option<u32>,
    /// Write the CSV here instead of standard output.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Scene or suite directory, or a .y4m file.
    #[arg(long = "in", value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Model file from `train`.
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Write the CSV here instead of standard output.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

/// A required setting is missing or malformed; exits with status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result =
        config::ConfigFile::load(cli.config.as_deref()).and_then(|file| match cli.command {
            Command::Synth(a) => commands::synth(a, &file),
            Command::Features(a) => commands::features(a, &file),
            Command::Train(a) => commands::train(a, &file),
            Command::Detect(a) => commands::detect(a, &file),
            Command::Eval(a) => commands::eval(a, &file),
            Command::Bench(a) => commands::bench(a, &file),
        });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
