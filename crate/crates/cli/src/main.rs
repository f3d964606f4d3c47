mod args;
mod commands;

use std::fs;
use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;
use serde_json::json;

use args::{Cli, Command};
use commands::Report;

/// Bad flag combinations that clap cannot express.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

const EXIT_USAGE: u8 = 2;
const EXIT_CAPACITY: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<drpp_core::Error>() {
            return match e {
                drpp_core::Error::Capacity { .. } => EXIT_CAPACITY,
                drpp_core::Error::Contract(_) => 1,
                _ => EXIT_USAGE,
            };
        }
    }
    1
}

fn dispatch(command: &Command) -> Result<(&'static str, Report)> {
    Ok(match command {
        Command::Threshold(a) => ("threshold", commands::threshold(a)?),
        Command::Simulate(a) => ("simulate", commands::simulate(a)?),
        Command::Scan(a) => ("scan", commands::scan(a)?),
        Command::Rates(a) => ("rates", commands::rates(a)?),
        Command::Plan(a) => ("plan", commands::plan(a)?),
        Command::VerifyOracle(a) => ("verify-oracle", commands::verify_oracle(a)?),
        Command::CheckOptimality(a) => ("check-optimality", commands::check_optimality(a)?),
    })
}

fn run(cli: &Cli) -> Result<()> {
    let (name, report) = match cli.workers {
        Some(0) => return Err(UsageError("--workers must be at least 1".into()).into()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()?
            .install(|| dispatch(&cli.command))?,
        None => dispatch(&cli.command)?,
    };
    let text = if cli.json {
        let envelope = json!({
            "command": name,
            "config": report.config,
            "results": report.results,
            "version": env!("CARGO_PKG_VERSION"),
        });
        serde_json::to_string_pretty(&envelope)? + "\n"
    } else {
        report.table
    };
    match &cli.output {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
