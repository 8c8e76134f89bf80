//! Experiment harness for the diffusivity estimator: configuration, scenario
//! execution and artifact persistence.

pub mod commands;
pub mod config;
pub mod error;
pub mod table;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::SweepSpec;
use crate::config::{ExperimentConfig, Overrides};
pub use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "diffest", version, about = "Stochastic diffusivity estimation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub measure_every: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a truth trajectory and noisy sensor measurements.
    Simulate(CommonArgs),
    /// Fit noise spectra to variance targets and choose the hyperdiffusivity.
    Calibrate {
        #[command(flatten)]
        common: CommonArgs,
        /// Targets file (JSON) with per-mode variances and μ₁ candidates.
        #[arg(long)]
        targets: PathBuf,
    },
    /// Run the outer mean-field iteration on a measurement file.
    Estimate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        measurements: PathBuf,
    },
    /// Repeat estimation over fresh data for a list of parameter values.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Sweep specification (JSON) with `parameter` and `values`.
        #[arg(long)]
        sweep: PathBuf,
    },
}

fn load(common: &CommonArgs) -> CliResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    cfg.apply(&Overrides {
        seed: common.seed,
        max_iters: common.max_iters,
        tol: common.tol,
        measure_every: common.measure_every,
    })?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Simulate(common) => commands::cmd_simulate(&load(common)?, &common.out),
        Command::Calibrate { common, targets } => {
            commands::cmd_calibrate(&load(common)?, targets, &common.out)
        }
        Command::Estimate {
            common,
            measurements,
        } => commands::cmd_estimate(&load(common)?, measurements, &common.out).map(|_| ()),
        Command::Sweep { common, sweep } => {
            let cfg = load(common)?;
            let spec = SweepSpec::load(sweep)?;
            commands::cmd_sweep(&cfg, &spec, &common.out).map(|_| ())
        }
    }
}
