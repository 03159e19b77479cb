use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

mod commands;
mod config;

use config::{CommonArgs, RunArgs};

/// Multi-agent trading desk and backtester.
#[derive(Debug, Parser)]
#[command(name = "tradecraft", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load price CSVs and auxiliary JSON documents and write a manifest.
    Ingest {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Manifest path; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a baseline strategy or the agent desk over a date range.
    Backtest(RunArgs),
    /// Run several strategies or configs and tabulate CR/AR/SR/MDD.
    Compare {
        #[arg(long)]
        config: Vec<PathBuf>,
        #[arg(long)]
        strategy: Vec<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Print the JSON schemas of the agent tools.
    Schemas,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_env("TRADECRAFT_LOG").unwrap_or_else(|_| EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Ingest { paths, out } => commands::ingest(paths, out.as_deref()),
        Command::Backtest(args) => commands::backtest(args),
        Command::Compare {
            config,
            strategy,
            common,
        } => commands::compare(config, strategy, common),
        Command::Schemas => commands::schemas(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
