use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

mod bench;
mod check;
mod model;

/// Concurrent external BSTs: throughput sweeps, correctness checks and the
/// speedup model.
#[derive(Parser, Debug)]
#[command(name = "cbst", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run throughput sweeps and write CSV or JSON records.
    Bench(bench::BenchArgs),
    /// Structural, balance and linearizability checks.
    Check(check::CheckArgs),
    /// Evaluate the speedup model.
    Model(model::ModelArgs),
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or flag combinations; nothing was run.
    #[error("{0}")]
    Usage(String),
    /// A check failed or a run could not complete.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Failed(_) => ExitCode::from(1),
            CliError::Usage(_) => ExitCode::from(2),
        }
    }
}

pub type CliResult = Result<(), CliError>;

pub fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

pub fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

/// `path` or stdout when absent.
pub fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| failed(format!("{}: {e}", p.display())))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bench(a) => bench::run(a),
        Command::Check(a) => check::run(a),
        Command::Model(a) => model::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Usage(_)) {
                eprintln!("\nFor more information, try '--help'.");
            }
            e.exit_code()
        }
    }
}
