//! Command-line front end: distributions, optimization, sweeps, Monte Carlo
//! validation and figure regeneration.

use std::io::Write;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod error;
pub mod json;
pub mod reproduce;
pub mod svg;
pub mod validate;

pub use config::{Flags, RunConfig, Settings};
pub use error::{CliError, CliResult};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "PHOTON_MUX_THREADS";

#[derive(Debug, Parser)]
#[command(name = "photon-mux", version, about = "Photon statistics of multiplexed heralded single-photon sources")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Output photon-number distribution, P1 and SNR of one architecture.
    Dist(Flags),
    /// Largest P1 reachable at guaranteed SNR >= theta.
    Optimize(Flags),
    /// Scalability curve over m, or an (eta, gamma) grid with --metric.
    Sweep(Flags),
    /// Compare analytic distributions with Monte Carlo.
    McValidate(Flags),
    /// Regenerate every figure dataset, its SVG and a manifest into --out.
    Reproduce(Flags),
}

/// Runs one command, writing its terminal report to `out`.
pub fn run(command: &Command, out: &mut dyn Write) -> CliResult<()> {
    match command {
        Command::Dist(f) => commands::cmd_dist(&Settings::resolve(f)?, out).map(drop),
        Command::Optimize(f) => commands::cmd_optimize(&Settings::resolve(f)?, out).map(drop),
        Command::Sweep(f) => commands::cmd_sweep(&Settings::resolve(f)?, out),
        Command::McValidate(f) => commands::cmd_mc_validate(&Settings::resolve(f)?, out).map(drop),
        Command::Reproduce(f) => commands::cmd_reproduce(&Settings::resolve(f)?, out).map(drop),
    }
}

/// Installs the global worker pool, capped by `PHOTON_MUX_THREADS` when set.
pub fn init_threads() -> CliResult<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
    // Fails only if a pool already exists, in which case it is kept.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}
