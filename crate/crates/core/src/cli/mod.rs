//! Batch command-line front end.
//!
//! Exit codes: 0 success, 2 schema or input error, 3 simulation error,
//! 4 computation error. Failures print one JSON line on standard error.

mod commands;
pub mod config;
pub mod output;
mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::Error;

pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_SIMULATION: i32 = 3;
pub const EXIT_COMPUTATION: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Schema(String),
    #[error(transparent)]
    Simulation(Error),
    #[error(transparent)]
    Computation(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Schema(_) => EXIT_SCHEMA,
            Self::Simulation(_) => EXIT_SIMULATION,
            Self::Computation(_) => EXIT_COMPUTATION,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Schema(_) => "schema",
            Self::Simulation(_) => "simulation",
            Self::Computation(_) => "computation",
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::json!({ "error": self.kind(), "exit_code": self.exit_code(), "message": self.to_string() })
            .to_string()
    }
}

pub(crate) fn schema(e: impl std::fmt::Display) -> CliError {
    CliError::Schema(e.to_string())
}

pub(crate) fn compute(e: Error) -> CliError {
    CliError::Computation(e)
}

#[derive(Debug, Parser)]
#[command(name = "subsidy-mte", version, about = "MTE estimation and optimal personalized subsidies")]
pub struct Cli {
    /// Log filter (error, warn, info, debug, trace).
    #[arg(long, global = true, env = "SUBSIDY_MTE_LOG", default_value = "warn")]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct IoArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a dataset from a selection model; writes data.csv and truth.json.
    Simulate(IoArgs),
    /// Fit estimators to a dataset; writes fit.json, mte_curve.csv, mte.svg.
    Estimate(IoArgs),
    /// Optimal subsidy per cell; writes solve.json, solve.csv, rule.json, welfare.json, policy.svg.
    Solve(IoArgs),
    /// Welfare under subsidy, direct, constant and first-best policies; writes ladder.json.
    Compare(IoArgs),
    /// Partial ranking of rules over an identified MTE set; writes verdicts.json and hasse.dot.
    Rank(IoArgs),
}

/// Runs a parsed command.
pub fn execute(cmd: &Command) -> Result<(), CliError> {
    match cmd {
        Command::Simulate(a) => commands::simulate(a),
        Command::Estimate(a) => commands::estimate(a),
        Command::Solve(a) => commands::solve(a),
        Command::Compare(a) => commands::compare(a),
        Command::Rank(a) => commands::rank(a),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_SCHEMA } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::new().parse_filters(&cli.log_level).format_timestamp(None).try_init();
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            e.exit_code()
        }
    }
}
