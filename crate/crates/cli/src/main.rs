//! Batch front-end: `nsoc solve|compare|check <config>`.
//!
//! Exit codes: 0 success, 1 I/O failure writing artifacts, 2 configuration
//! or schema error, 3 input data error, 4 optimizer did not converge (or a
//! `check` failed), 5 model evaluation or regularity failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("i/o error: {0}")]
    Io(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("check failed: {0}")]
    Check(String),
    #[error("model error: {0}")]
    Model(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Solver(_) | CliError::Check(_) => 4,
            CliError::Model(_) => 5,
        }
    }
}

impl From<nsoc::Error> for CliError {
    fn from(e: nsoc::Error) -> Self {
        use nsoc::Error as E;
        let msg = e.to_string();
        match e.root() {
            E::Config(_) | E::Range { .. } => CliError::Config(msg),
            E::Data(_) => CliError::Data(msg),
            _ => CliError::Model(msg),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "nsoc", version, about = "Nonsmooth optimal control scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimize one scenario and write trajectory, history and summary.
    Solve(RunArgs),
    /// Run every configured method and write the comparison report.
    Compare(RunArgs),
    /// Compare LD gradients with finite differences and test invariants.
    Check(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Scenario config (TOML).
    config: PathBuf,
    /// Output directory (defaults to the config's `out`, then `out/`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace a config entry, e.g. `--override solver.max_iter=100`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (args, which) = match cli.command {
        Command::Solve(a) => (a, "solve"),
        Command::Compare(a) => (a, "compare"),
        Command::Check(a) => (a, "check"),
    };
    let loaded = config::load(&args.config, &args.overrides)?;
    let out = args
        .out
        .or_else(|| loaded.config.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    match which {
        "solve" => commands::solve(&loaded, &out),
        "compare" => commands::compare(&loaded, &out),
        _ => commands::check(&loaded, std::io::stdout().lock()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nsoc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
