//! Batch front-end for `avgsgd-core`: reads an experiment configuration and
//! runs the bounds, run, verify or audit pipeline, writing CSV artifacts.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

pub use commands::{Outcome, Overrides, Session};
pub use config::ExperimentConfig;

/// Exit status when a verification or audit check fails.
pub const EXIT_FAILED: u8 = 1;
/// Exit status for invalid input or any runtime error.
pub const EXIT_ERROR: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "avgsgd", version, about = "Explicit L2 bounds for SGD and averaged SGD, checked by simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Experiment configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed; overrides `run.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads for the simulation. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Multiply every bound by FACTOR before testing dominance.
    #[arg(long, global = true, value_name = "FACTOR")]
    pub debug_scale_bounds: Option<f64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Evaluate the requested bounds and write the constants ledger.
    Bounds,
    /// Simulate replicated trajectories and write pooled error curves.
    Run,
    /// Bounds, simulation and dominance tests; exit 1 if any test fails.
    Verify,
    /// Check the structural assumptions on a grid; exit 1 if any fails.
    Audit,
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            threads: self.threads,
            debug_scale_bounds: self.debug_scale_bounds,
        }
    }
}

/// Runs one parsed invocation.
pub fn execute(cli: &Cli) -> Result<Outcome> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("--config PATH is required"))?;
    let config = ExperimentConfig::load(path)?;
    let session = Session::new(config, &cli.overrides())?;
    match cli.command {
        Command::Bounds => commands::cmd_bounds(&session),
        Command::Run => commands::cmd_run(&session),
        Command::Verify => commands::cmd_verify(&session),
        Command::Audit => commands::cmd_audit(&session),
    }
}
