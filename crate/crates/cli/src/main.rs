//! `turing-crn` command-line front end.
//!
//! Exit codes: 0 on success, 2 for bad input, 3 when an internal
//! consistency check fails.

mod commands;
mod manifest;
mod model;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use turing_crn::{Error, Tolerances};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("internal consistency failure: {0}")]
    Internal(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) | CliError::Io(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidNetwork(_)
            | Error::NegativeConcentration { .. }
            | Error::Dimension { .. }
            | Error::InvalidParameter(_)
            | Error::Expression(_)
            | Error::Positivity(_)
            | Error::Parse(_) => CliError::Input(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "turing-crn", version, about = "Turing-like instability analysis for mass-action networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Steady state, ODE stability, coefficient conditions and domain thresholds.
    Analyze(commands::AnalyzeArgs),
    /// Leading eigenvalues of J − κ²D on a wave-number grid (CSV).
    Dispersion(commands::DispersionArgs),
    /// Minimal domain measures for which the instability is guaranteed.
    Threshold(commands::ThresholdArgs),
    /// 1D reaction–diffusion run with Neumann boundary conditions.
    Simulate(commands::SimulateArgs),
    /// Neumann Laplace eigenvalues of an interval, disk or ball (CSV).
    Modes(commands::ModesArgs),
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let tol = Tolerances::from_env().map_err(|e| CliError::Input(format!("{}: {e}", turing_crn::tol::ENV_VAR)))?;
    match &cli.command {
        Command::Analyze(a) => commands::analyze(a, &tol),
        Command::Dispersion(a) => commands::dispersion_cmd(a, &tol),
        Command::Threshold(a) => commands::threshold(a, &tol),
        Command::Simulate(a) => commands::simulate(a, &tol),
        Command::Modes(a) => commands::modes(a, &tol),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse_from(model::rewrite_rate_flags(std::env::args()));
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
