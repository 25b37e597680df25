//! `mme`: synthesize scans, fit constrained plane sets, run the benchmark sweep.
//!
//! Exit codes: 0 success, 1 invalid input or I/O failure, 2 the model could not be
//! reached on the data (no consistent clustering, or no plane set met the
//! constraints).

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use crate::commands::Outcome;
use crate::settings::Settings;

#[derive(Debug, Parser)]
#[command(name = "mme", version, about = "Multi-plane model estimation with inter-plane angle constraints")]
struct Cli {
    /// `key = value` settings file; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a labelled range scan of a built-in object.
    Synth(SynthArgs),
    /// Fit the planes of a constraint model to a cloud.
    Fit(FitArgs),
    /// Run the seeded method/object/noise sweep and write CSV tables.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// cube, pyramid or double_pyramid.
    #[arg(long)]
    pub object: Option<String>,
    /// Turntable position, 1 to 8.
    #[arg(long)]
    pub view: Option<usize>,
    /// Depth noise standard deviation.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Depth noise mean.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Defaults to $MME_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sampling density in pixels per radian.
    #[arg(long)]
    pub focal: Option<f64>,
    #[arg(long)]
    pub depth_scale: Option<f64>,
    /// Cloud file; the object's constraints go next to it with a `.constraints` extension.
    #[arg(long)]
    pub out: PathBuf,
}

/// Fitting parameters shared by `fit` and `bench`.
#[derive(Debug, Args, Default)]
pub struct FitParams {
    /// Neighbours for normal estimation.
    #[arg(long)]
    pub k_neighbors: Option<usize>,
    /// RANSAC iterations of the constrained fit.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Points drawn per group in the constrained fit.
    #[arg(long)]
    pub sample_size: Option<usize>,
    /// Constraint tolerance of the constrained fit, degrees.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Fraction of each group offered to the grown plane.
    #[arg(long)]
    pub min_eval_fraction: Option<f64>,
    /// Inlier distance of the unconstrained baselines.
    #[arg(long)]
    pub distance_threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub cloud: PathBuf,
    #[arg(long)]
    pub constraints: PathBuf,
    /// mme, mcransac, clustered or iterative. The grouped methods take their groups
    /// from the cloud's labels: label `l` feeds model plane `l`.
    #[arg(long)]
    pub method: Option<String>,
    /// Defaults to $MME_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report CSV; per-plane parameters go to `<stem>.planes.csv` beside it.
    #[arg(long)]
    pub out: PathBuf,
    /// Record the run time in the report.
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub params: FitParams,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated: mme, mcransac, clustered, iterative.
    #[arg(long)]
    pub methods: Option<String>,
    /// Comma-separated object names, or `all`.
    #[arg(long)]
    pub objects: Option<String>,
    /// Comma-separated noise levels.
    #[arg(long)]
    pub sigmas: Option<String>,
    /// Comma-separated view numbers.
    #[arg(long)]
    pub views: Option<String>,
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Defaults to $MME_SEED, then 42.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub depth_scale: Option<f64>,
    /// Output directory for cells.csv and summary.csv.
    #[arg(long)]
    pub out: PathBuf,
    /// Record per-cell run time. Makes the output differ between runs.
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub params: FitParams,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = Settings::load(cli.config.as_deref()).and_then(|settings| {
        let out = match &cli.command {
            Command::Synth(a) => commands::synth(a, &settings),
            Command::Fit(a) => commands::fit(a, &settings),
            Command::Bench(a) => commands::bench(a, &settings),
        };
        settings.warn_unused();
        out
    });
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Unreachable(e)) => {
            eprintln!("mme: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            error!("{e:#}");
            eprintln!("mme: {e:#}");
            ExitCode::from(1)
        }
    }
}
