mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::Overrides;

/// Queueing analysis and flow-level simulation of size-based scheduling
/// with a non-zero scheduling cost.
///
/// Set RAYON_NUM_THREADS to bound the worker pool used for sweeps and
/// paired simulation runs (builds with the default `parallel` feature).
#[derive(Debug, Parser)]
#[command(name = "flowsched", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mean waiting/residence/completion curves over a log grid of sizes.
    Analyze,
    /// Solve split thresholds along a load, cost, or tail-shape axis.
    Threshold,
    /// Simulate one policy on a generated or replayed trace.
    Simulate,
    /// Rebuild a bundled experiment grid (fig4..fig9) for both presets.
    Reproduce {
        /// One of fig4, fig5, fig6, fig7, fig8, fig9.
        figure: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let settings = config::resolve(&cli.overrides)?;
    match cli.command {
        Command::Analyze => commands::analyze(&settings),
        Command::Threshold => commands::threshold(&settings),
        Command::Simulate => commands::simulate(&settings),
        Command::Reproduce { figure } => commands::reproduce(figure.parse()?, &settings),
    }
}
