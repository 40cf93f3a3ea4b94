//! Command-line driver: identity battery, linearization checks, residual
//! evaluation, square-root extraction and continuation solves.

pub mod commands;
pub mod config;
pub mod container;
pub mod report;
pub mod rng;
pub mod verify;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::Outcome;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const SUITE_FAILED: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const NUMERICAL: i32 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Container(#[from] container::ContainerError),
    #[error("{0}")]
    Usage(String),
    #[error("writing output: {0}")]
    Output(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] balanced_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => exit::NUMERICAL,
            _ => exit::USAGE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "balanced", version, about = "Balanced-metric and Hermitian-Yang-Mills solver toolkit")]
pub struct Cli {
    /// TOML run configuration; defaults apply when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, created if needed.
    #[arg(long, global = true, default_value = "balanced-out")]
    pub out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for the identity battery.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Run the identity battery and write report.json.
    Verify,
    /// Compare finite differences of the system map against the linearized blocks.
    Linearize,
    /// Evaluate the system residual of a stored state (or the flat base point).
    Residual,
    /// Extract the metric from a positive (2,2)-form.
    Squareroot,
    /// Continue the manufactured or homogeneous problem in α′.
    Solve,
    /// As `solve`, with the tangent-bundle equation included.
    SolveCoupled,
}

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return code;
        }
    };
    match commands::execute(&cli) {
        Ok(o) => o.code(),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
