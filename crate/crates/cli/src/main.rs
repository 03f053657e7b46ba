//! `shlab`: reproducible cycle experiments from the command line.
//!
//! Exit codes: 0 success, 1 invalid configuration or input, 2 violated
//! mathematical precondition, 3 p-adic precision exhausted, 4 search bound
//! exhausted, 70 internal inconsistency.

mod config;
mod modes;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use config::{Cli, ExperimentConfig};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    let result = ExperimentConfig::from_cli(cli).and_then(|c| modes::run(&c));
    match result {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
