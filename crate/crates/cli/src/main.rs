//! `tdvertex`: scenes, polarization precompute, topological derivative maps,
//! shape rankings and self-checks from the command line.

mod commands;
mod config;
mod validate;

use std::process::ExitCode;

use clap::Parser;

use config::Cli;

/// Exit status for usage, input and cache errors.
const EXIT_USAGE: u8 = 1;
/// Exit status for solver failures and failed checks.
const EXIT_NUMERICAL: u8 = 2;

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct CheckFailed(pub String);

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<CheckFailed>().is_some() {
        return EXIT_NUMERICAL;
    }
    match err.downcast_ref::<tdvertex::Error>() {
        Some(tdvertex::Error::NotConverged { .. } | tdvertex::Error::Resolution(_)) => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
