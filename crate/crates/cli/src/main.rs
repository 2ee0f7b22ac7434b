//! `robustbar`: calibrate vanilla and one-touch quotes, extract joint laws,
//! price barrier exotics and compute robust bounds from the command line.
//!
//! Exit status: 0 success, 1 usage/IO/schema error, 2 quotes fail static
//! validation, 3 quotes admit arbitrage (certificate written), 4 solver
//! stall (feasibility undecided).

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;
use commands::CliError;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("robustbar: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid => 2,
            CliError::Arbitrage { .. } => 3,
            CliError::Stalled(_) => 4,
            CliError::Io { .. } | CliError::Core(_) | CliError::Usage(_) => 1,
        }
    }
}
