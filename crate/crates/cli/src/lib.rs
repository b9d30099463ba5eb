//! Command-line pipeline: generate or load corridor data, smooth, cluster
//! speeds, partition the day, derive lags, fit, forecast and evaluate.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data, schema,
//! parameter or missing-artifact error, 3 estimation failure.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod config;
pub mod error;
pub mod stages;

pub use config::PipelineConfig;
pub use error::CliError;
pub use stages::{run_pipeline, Stage};

#[derive(Debug, Parser)]
#[command(name = "starima", version, about = "Speed-dependent lag STARIMA traffic forecasting")]
pub struct Cli {
    /// `key = value` configuration file.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory, overriding `paths.output`.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    /// Extra `key=value` settings applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Draw a synthetic corridor with planted regimes.
    Generate,
    /// Average raw readings into flow and speed slots.
    Smooth,
    /// Cross-correlation profiles of upstream/downstream flow pairs.
    Ccf,
    /// Cluster pooled speeds with ISODATA.
    Cluster,
    /// Turn speed clusters into contiguous regimes.
    Partition,
    /// Temporal lags per regime for the configured lag mode.
    Lags,
    /// Fit the model.
    Fit,
    /// Forecast from the fitted model.
    Forecast,
    /// Compare lag modes and the ARIMA baseline on held-out windows.
    Evaluate,
    /// Every stage in order, generating data first when none is configured.
    Pipeline,
}

impl Cli {
    pub fn resolve_config(&self) -> Result<PipelineConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::from_file(path)?,
            None => PipelineConfig::default(),
        };
        for o in &self.overrides {
            config.apply_override(o)?;
        }
        if let Some(out) = &self.output {
            config.output = out.clone();
        }
        Ok(config)
    }
}

pub fn execute(command: Command, config: &PipelineConfig) -> Result<String, CliError> {
    let stage = match command {
        Command::Pipeline => return run_pipeline(config),
        Command::Generate => Stage::Generate,
        Command::Smooth => Stage::Smooth,
        Command::Ccf => Stage::Ccf,
        Command::Cluster => Stage::Cluster,
        Command::Partition => Stage::Partition,
        Command::Lags => Stage::Lags,
        Command::Fit => Stage::Fit,
        Command::Forecast => Stage::Forecast,
        Command::Evaluate => Stage::Evaluate,
    };
    stage.run(config)
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match cli.resolve_config().and_then(|c| execute(cli.command, &c)) {
        Ok(summary) => {
            print!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
