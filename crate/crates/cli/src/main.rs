//! `schemalink` command line: ground truth, prompts, scoring, focused
//! schemas and evaluation over Spider-style inputs.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::{Overrides, PipelineConfig};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config or missing inputs.
    #[error("{0}")]
    Usage(String),
    /// Inputs that were read but could not be processed.
    #[error("{0}")]
    Data(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 1,
        }
    }
}

pub(crate) fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

#[derive(Parser)]
#[command(name = "schemalink", version, about = "Schema-linking toolchain for text-to-SQL")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Derive role-labelled links from gold SQL.
    ExtractGt,
    /// Render chunked linking prompts and a manifest.
    Render,
    /// Score every instance with the oracle, the lexical baseline or a file.
    Score,
    /// Threshold predictions into focused-schema prompts.
    Focus,
    /// Evaluate predictions against gold links.
    Eval,
    /// Threshold sweep CSV and the best threshold.
    Sweep,
    /// Compare two link files question by question.
    DiffLinks { a: std::path::PathBuf, b: std::path::PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = PipelineConfig::resolve(&cli.overrides).and_then(|cfg| match &cli.command {
        Command::ExtractGt => commands::extract_gt(&cfg),
        Command::Render => commands::render(&cfg),
        Command::Score => commands::score(&cfg),
        Command::Focus => commands::focus(&cfg),
        Command::Eval => commands::eval(&cfg),
        Command::Sweep => commands::sweep(&cfg),
        Command::DiffLinks { a, b } => commands::diff(a, b),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
