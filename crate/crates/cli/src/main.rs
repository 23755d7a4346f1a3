//! `vgs`: budget-constrained value-guided search harness.
//!
//! Subcommands cover the full workflow: `filter` a corpus, `collect` the
//! roll-in/roll-out trace dataset, `train` a value or Bradley-Terry model,
//! run a single `search`, grid `sweep`s, the `flops` calculator, and
//! `report` aggregation.
//!
//! Exit codes: 0 success; 2 invalid configuration (field diagnostics on
//! stderr); 3 transport failure (partial outputs preserved).

mod commands;
mod config;
mod run;

use clap::{Parser, Subcommand};
use vgs_core::generator::GeneratorError;
use vgs_core::scorer::ScorerError;
use vgs_core::search::SearchError;

#[derive(Parser)]
#[command(name = "vgs", version, about = "Value-guided search harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pre-filter a problem corpus.
    Filter(commands::filter::FilterArgs),
    /// Collect the roll-in/roll-out trace dataset.
    Collect(commands::collect::CollectArgs),
    /// Train the value classifier or the Bradley-Terry model.
    Train(commands::train::TrainArgs),
    /// Run one search method over the corpus.
    Search(commands::search::SearchArgs),
    /// Run a grid of methods, budgets, widths, and block sizes.
    Sweep(commands::sweep::SweepArgs),
    /// Inference FLOPs calculator.
    Flops(commands::flops::FlopsArgs),
    /// Aggregate sweep outputs into a report.
    Report(commands::report::ReportArgs),
}

/// Error category carrying the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration")]
    Config(Vec<String>),
    #[error("transport failure: {0}")]
    Transport(String),
}

impl CliError {
    pub fn from_search(e: SearchError) -> anyhow::Error {
        match e {
            SearchError::Config(msgs) => CliError::Config(msgs).into(),
            SearchError::Generation {
                source: GeneratorError::Transport { .. } | GeneratorError::Timeout { .. },
                ..
            } => CliError::Transport(e.to_string()).into(),
            SearchError::Scoring {
                source: ScorerError::Transport { .. } | ScorerError::Timeout { .. },
                ..
            } => CliError::Transport(e.to_string()).into(),
            other => anyhow::Error::new(other),
        }
    }
}

impl From<Vec<String>> for CliError {
    fn from(msgs: Vec<String>) -> Self {
        CliError::Config(msgs)
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Filter(args) => commands::filter::run(args),
        Command::Collect(args) => commands::collect::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Search(args) => commands::search::run(args),
        Command::Sweep(args) => commands::sweep::run(args),
        Command::Flops(args) => commands::flops::run(args),
        Command::Report(args) => commands::report::run(args),
    };
    let err = match result {
        Ok(()) => return,
        Err(e) => e,
    };
    if let Some(cli_err) = err.downcast_ref::<CliError>() {
        match cli_err {
            CliError::Config(fields) => {
                let diag = serde_json::json!({ "error": "invalid_config", "fields": fields });
                eprintln!("{diag}");
                std::process::exit(2);
            }
            CliError::Transport(message) => {
                let diag = serde_json::json!({
                    "error": "transport_failure",
                    "message": message,
                    "note": "partial outputs preserved",
                });
                eprintln!("{diag}");
                std::process::exit(3);
            }
        }
    }
    eprintln!("{}", serde_json::json!({ "error": "failed", "message": err.to_string() }));
    std::process::exit(1);
}
