//! Command-line front end over the estimation library. Every subcommand is
//! deterministic given its seed: file outputs use stable orderings and
//! shortest round-trip float formatting, so identical invocations produce
//! byte-identical artifacts.

pub mod commands;

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "mssl",
    version,
    about = "Multi-task regression with joint task-structure estimation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic multi-task dataset with known structure
    Generate(commands::GenerateArgs),
    /// Fit a model; writes model.json and an objective trace
    Train(commands::TrainArgs),
    /// Write per-task predictions for a dataset
    Predict(commands::PredictArgs),
    /// Score a model on labelled data
    Evaluate(commands::EvaluateArgs),
    /// Pick penalties by stability selection or cross-validation
    Select(commands::SelectArgs),
    /// Export a model's task graph as JSON and DOT
    ExportStructure(commands::ExportStructureArgs),
    /// Compare the joint estimator against per-task least squares
    Bench(commands::BenchArgs),
}

/// Parse `argv` and run one subcommand. Returns the process exit code:
/// 0 success, 1 usage or input error, 2 numeric failure, 3 fit finished
/// without converging (artifacts are still written).
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = err.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Generate(args) => commands::generate(&args),
        Command::Train(args) => commands::train(&args),
        Command::Predict(args) => commands::predict(&args),
        Command::Evaluate(args) => commands::evaluate(&args),
        Command::Select(args) => commands::select(&args),
        Command::ExportStructure(args) => commands::export_structure(&args),
        Command::Bench(args) => commands::bench(&args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_numeric() {
                EXIT_NUMERIC
            } else {
                EXIT_USAGE
            }
        }
    }
}
