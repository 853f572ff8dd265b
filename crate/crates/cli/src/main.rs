//! `leoint`: run geolocation, clock-budget, survey and link-budget pipelines
//! from JSON configurations.

mod commands;
mod config;
mod failure;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use failure::Failure;
use output::Format;

#[derive(Parser)]
#[command(name = "leoint", version, about = "Emitter geolocation and interference survey from low Earth orbit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize captures and trajectories for a pass scenario.
    Simulate(Common),
    /// Estimate a transmitter position from captures.
    Estimate(Common),
    /// Monte Carlo study of clock-driven geolocation error.
    Montecarlo(Common),
    /// Build control statistics, run detection and map hotspots.
    Survey(Common),
    /// Interference power and jamming-efficiency report.
    Linkbudget(Common),
}

#[derive(Args, Debug)]
pub struct Common {
    /// JSON configuration; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "leoint-out")]
    out: PathBuf,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Override a configuration value by dotted path, e.g. `trials=200`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Artifact formats to write (repeatable); all when omitted.
    #[arg(long, value_enum)]
    format: Vec<Format>,
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Estimate(a) => commands::estimate(&a),
        Command::Montecarlo(a) => commands::montecarlo(&a),
        Command::Survey(a) => commands::survey(&a),
        Command::Linkbudget(a) => commands::linkbudget(&a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
