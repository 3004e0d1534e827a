//! `capillary`: Heintze-Karcher, Minkowski and flow checks for capillary
//! hypersurfaces, with JSON or CSV reports.

mod args;
mod commands;

use std::fs::File;
use std::io::{self, Write};
use std::process::ExitCode;

use clap::Parser;
use serde::Serialize;

use args::{Cli, Command, Format};

/// One pass/fail check carried in every report.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), pass: value <= tolerance, value, tolerance }
    }

    pub fn at_least(name: &str, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), pass: value >= tolerance, value, tolerance }
    }
}

pub struct Output {
    pub json: serde_json::Value,
    pub csv: String,
    pub checks: Vec<Check>,
}

#[derive(Debug)]
pub enum CliError {
    Invalid(String),
}

impl From<capillary_core::Error> for CliError {
    fn from(e: capillary_core::Error) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Invalid(e.to_string())
    }
}

fn run(cli: &Cli) -> Result<Output, CliError> {
    match &cli.command {
        Command::VerifyBall(a) => commands::verify(a, args::Setting::Ball),
        Command::VerifyHalfspace(a) => commands::verify(a, args::Setting::Halfspace),
        Command::Flow(a) => commands::flow(a),
        Command::Geodesic(a) => commands::geodesic(a),
        Command::Curvature(a) => commands::curvature(a),
        Command::Convergence(a) => commands::convergence(a),
    }
}

fn emit(cli: &Cli, out: &Output) -> io::Result<()> {
    let common = cli.command.common();
    let text = match common.format {
        Format::Json => serde_json::to_string_pretty(&out.json).map_err(io::Error::other)? + "\n",
        Format::Csv => out.csv.clone(),
    };
    match &common.out {
        Some(path) => File::create(path)?.write_all(text.as_bytes()),
        None => io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let output = match run(&cli) {
        Ok(o) => o,
        Err(CliError::Invalid(msg)) => {
            eprintln!("invalid input: {msg}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = emit(&cli, &output) {
        eprintln!("cannot write report: {e}");
        return ExitCode::from(2);
    }
    let failed: Vec<&Check> = output.checks.iter().filter(|c| !c.pass).collect();
    for c in &failed {
        eprintln!("check failed: {} = {:e} (tolerance {:e})", c.name, c.value, c.tolerance);
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
