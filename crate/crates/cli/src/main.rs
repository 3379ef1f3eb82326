mod commands;
mod config;
mod output;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Experiments with the Zakharov system on a periodic box.
#[derive(Parser, Debug)]
#[command(name = "zakharov", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// INI file with global keys and a `[command]` section.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Extra `key=value` overrides.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split-step evolution of small or supplied data.
    Solve(commands::SolveArgs),
    /// Picard iteration for the mild formulation.
    Picard(commands::PicardArgs),
    /// Adapted and classical norms of a space-time field.
    Norms(commands::NormsArgs),
    /// Second-iterate growth over a range of scales.
    IllposedSweep(commands::SweepArgs),
    /// Classify a regularity point.
    Region(commands::RegionArgs),
    /// Randomized stress test of one inequality.
    Stress(commands::StressArgs),
    /// Run the quick built-in checks.
    Selftest,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => commands::solve(a),
        Command::Picard(a) => commands::picard(a),
        Command::Norms(a) => commands::norms(a),
        Command::IllposedSweep(a) => commands::illposed_sweep(a),
        Command::Region(a) => commands::region(a),
        Command::Stress(a) => commands::stress(a),
        Command::Selftest => selftest::run(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
