use std::process::ExitCode;

use clap::Parser;
use epicontrol_cli::{execute, Cli, RunConfig};

fn main() -> ExitCode {
    let config = RunConfig::from(Cli::parse());
    match execute(&config) {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            if !outcome.converged {
                eprintln!("error: optimizer did not converge (results written)");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
