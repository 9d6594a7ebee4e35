mod args;
mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

/// A verifier ran to completion and the property did not hold.
#[derive(Debug)]
pub struct CheckFailed(pub String);

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "check failed: {}", self.0)
    }
}

impl std::error::Error for CheckFailed {}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<umco::Error>() {
        Some(e) if e.is_convergence_failure() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::FbCapacity(a) => commands::fb_capacity(a),
        Command::FiniteHorizon(a) => commands::finite_horizon(a),
        Command::Constrained(a) => commands::constrained(a),
        Command::Bssc(a) => commands::bssc(a),
        Command::NofbVerify(a) => commands::nofb_verify(a),
        Command::ErrorExponent(a) => commands::error_exponent(a),
        Command::CheckConditions(a) => commands::check_conditions(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
