//! `lrcs` command-line entry point.

mod args;
mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::Gen(c) => commands::gen(c),
        Command::Solve(c) => commands::solve(c, false),
        Command::Federate(c) => commands::solve(c, true),
        Command::Bench(c) => commands::bench(c),
        Command::GradCheck(c) => commands::grad_check(c),
        Command::LemmaCheck(c) => commands::lemma_check(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
