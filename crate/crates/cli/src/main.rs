//! `flcsp`: model checking and seeded simulation of federated-learning
//! orchestration protocols.
//!
//! Exit codes: 0 when everything holds, 1 when a check is violated or a
//! trace does not conform, 2 on usage errors and exhausted budgets.

mod check;
mod common;
mod sim;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "flcsp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check deadlock freedom and termination properties of a model.
    Check(check::CheckArgs),
    /// Run seeded concrete rounds with pluggable callbacks.
    Sim(sim::SimArgs),
    /// Check a JSON Lines trace file against a model.
    Conform(sim::ConformArgs),
}

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Holds,
    Violated,
    ResourceExceeded,
}

impl Status {
    fn code(self) -> u8 {
        match self {
            Status::Holds => 0,
            Status::Violated => 1,
            Status::ResourceExceeded => 2,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check(args) => check::run(&args),
        Command::Sim(args) => sim::run(&args),
        Command::Conform(args) => sim::conform(&args),
    };
    match result {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
