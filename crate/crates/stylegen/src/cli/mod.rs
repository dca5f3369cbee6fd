//! Command-line surface: `ingest`, `train`, `generate`, `evaluate`,
//! `grid`. Exit codes: 0 ok, 2 config error, 3 data error, 4 training
//! divergence.

mod commands;
mod config;
mod ingest;
mod report;

pub use commands::{cmd_evaluate, cmd_generate, cmd_grid, cmd_train, GridRow, OutputMeta};
pub use config::{effective_config, Overrides, RunConfig, TaskKind};
pub use ingest::{cmd_ingest, load_vocabs, read_raw_records, IngestReport};
pub use report::{ExperimentReport, ReportRow};

use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("training diverged: {0}")]
    Diverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Diverged(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "stylegen", about = "Stylistically controlled generation from meaning representations", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tokenize, delexicalize and index the raw dataset splits.
    Ingest,
    /// Train the configured model on the ingested dataset.
    Train,
    /// Decode the test split with a trained checkpoint.
    Generate {
        /// Output file; one realized string per line.
        #[arg(long, default_value = "outputs.txt")]
        out: PathBuf,
    },
    /// Score an output file against the test split.
    Evaluate {
        /// Output file produced by `generate`.
        #[arg(long)]
        outputs: PathBuf,
        /// Report base name under the work dir's `reports/`.
        #[arg(long, default_value = "report")]
        name: String,
    },
    /// Train one model per grid point and keep the best by dev
    /// perplexity.
    Grid,
}

/// Runs one CLI invocation; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let config = match effective_config(&cli.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    let result: Result<(), CliError> = match &cli.command {
        Command::Ingest => cmd_ingest(&config).map(|data| {
            for (split, report) in &data.report.splits {
                eprintln!(
                    "{split}: {} records, classes {:?}",
                    report.records, report.by_class
                );
            }
        }),
        Command::Train => cmd_train(&config, false).map(|report| {
            eprintln!(
                "best epoch {} dev perplexity {:.4}",
                report.best_epoch, report.best_dev_perplexity
            );
        }),
        Command::Generate { out } => cmd_generate(&config, out).map(|n| {
            eprintln!("generated {n} realizations -> {}", out.display());
        }),
        Command::Evaluate { outputs, name } => {
            cmd_evaluate(&config, outputs, name).map(|report| {
                print!("{}", report.to_table());
            })
        }
        Command::Grid => cmd_grid(&config, false).map(|rows| {
            for row in &rows {
                eprintln!(
                    "layers {} size {:>4}: dev perplexity {:.4} (epoch {})",
                    row.rnn_layers, row.rnn_size, row.best_dev_perplexity, row.best_epoch
                );
            }
        }),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
