//! `matcert`: generate instances, run verification suites and decompose
//! conditional mutual information from the command line.
//!
//! Exit status: 0 when every check passes, 1 on a verification failure,
//! 2 on usage or input errors.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
