use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod exit;
mod overlay;

use config::RunArgs;

/// Velocity-based crowd anomaly detection from optical flow and head boxes.
#[derive(Debug, Parser)]
#[command(name = "crowdflow", version, about)]
struct Cli {
    /// More log output (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Learn per-regime motion models from a scene dataset
    Train(RunArgs),
    /// Score every detected person and write events as JSON Lines
    Infer(RunArgs),
    /// WCSS, silhouette and box-area regression tables
    Diagnose(RunArgs),
    /// Generate a synthetic scene directory from a spec
    Synth(RunArgs),
    /// Summarize a model file and optionally an events file
    Report(RunArgs),
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Train(a) => commands::train_cmd(&a.resolve()?),
        Command::Infer(a) => commands::infer_cmd(&a.resolve()?),
        Command::Diagnose(a) => commands::diagnose_cmd(&a.resolve()?),
        Command::Synth(a) => commands::synth_cmd(&a.resolve()?),
        Command::Report(a) => commands::report_cmd(&a.resolve()?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = exit::classify(&e);
            eprintln!("error: {e:#}");
            ExitCode::from(kind.code() as u8)
        }
    }
}
