use std::process::ExitCode;

use avgsgd_cli::{execute, Cli, Outcome, EXIT_ERROR, EXIT_FAILED};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(Outcome::Passed) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => {
            eprintln!("avgsgd: one or more checks failed; see the CSV reports");
            ExitCode::from(EXIT_FAILED)
        }
        Err(e) => {
            eprintln!("avgsgd: error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
