//! `mfe`: degree tables and verification solvers for the two-parameter
//! mean field equation on the flat unit torus.
//!
//! Subcommands: `degree` (exact Leray-Schauder degree tables), `solve`
//! (damped Newton on the scalar equation or the equivalent 2x2 system),
//! `bubble` (asymptotic expansion checks for the concentration ansatz),
//! and `shadow` (the reduced point-field system with a non-degeneracy
//! certificate). Exit codes: 0 success, 2 malformed input, 3
//! non-convergence, 4 blow-up guard, 5 resolution limits.

mod commands;
mod config;
mod error;
mod expr;
mod output;
mod rational;

use clap::Parser;

use config::{Cli, Command, CommonConfig, FileConfig};
use error::AppError;

fn run(cli: &Cli) -> Result<(), AppError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let common = CommonConfig::resolve(cli, &file);
    match &cli.command {
        Command::Degree(args) => {
            let merged = args.merge(file.degree.as_ref());
            commands::degree::run(&merged, &common)
        }
        Command::Solve(args) => {
            let merged = args.merge(file.solve.as_ref());
            commands::solve::run(&merged, &common)
        }
        Command::Bubble(args) => {
            let merged = args.merge(file.bubble.as_ref());
            commands::bubble::run(&merged, &common)
        }
        Command::Shadow(args) => {
            let merged = args.merge(file.shadow.as_ref());
            commands::shadow::run(&merged, &common)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(&cli) {
        eprintln!("error: {}", err.message);
        std::process::exit(err.code);
    }
}
