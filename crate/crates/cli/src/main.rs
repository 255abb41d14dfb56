//! `itslcc`: life-cycle cost, Monte Carlo cost risk and system effectiveness
//! of roadside sensor-station rollouts.
//!
//! Exit codes: 0 success, 1 invalid input or usage, 2 file system error.
//! Failures print one line `error[<kind>]: <message>` to stderr.

mod args;
mod commands;
mod error;
mod manifest;
mod output;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command, Format};
use error::CliError;
use output::Output;

fn run(cli: Cli) -> Result<(), CliError> {
    let default_format = match cli.command {
        Command::Cities | Command::Schedule(_) => Format::Csv,
        _ => Format::Json,
    };
    let out = Output {
        dir: cli.out,
        format: cli.format.unwrap_or(default_format),
    };
    match &cli.command {
        Command::Lcc(a) => commands::lcc(a, &out),
        Command::Simulate(a) => commands::simulate(a, &out),
        Command::Effect(a) => commands::effect(a, &out),
        Command::Cities => commands::cities(&out),
        Command::Ahp(a) => commands::ahp(a, &out),
        Command::Schedule(a) => commands::schedule(a, &out),
    }
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    let line = message.lines().map(str::trim).filter(|l| !l.is_empty()).collect::<Vec<_>>().join(" ");
    eprintln!("error[{kind}]: {line}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            return fail("usage", first, 1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string(), e.exit_code()),
    }
}
