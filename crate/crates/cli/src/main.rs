//! `dptab`: train, sample, evaluate and audit differentially private
//! tabular generators from the command line.
//!
//! Failures print one JSON object `{code, message, context}` on stderr and
//! exit with 1 (runtime) or 2 (usage, input validation, files).

mod commands;
mod config;
mod error;

use clap::{Parser, Subcommand};
use serde_json::json;

use commands::{accountant, dyck, evaluate, maxent, sample, sweep, train};
use error::{CliError, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "dptab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model from a CSV, a schema and a run configuration.
    Train(train::TrainArgs),
    /// Draw rows from a trained checkpoint.
    Sample(sample::SampleArgs),
    /// Score synthetic rows against real rows.
    Evaluate(evaluate::EvaluateArgs),
    /// Privacy accounting: σ → ε, or calibrate σ for a target ε.
    Accountant(accountant::AccountantArgs),
    /// Train, sample and evaluate over a grid of values and seeds.
    Sweep(sweep::SweepArgs),
    /// Maximum-entropy experiments.
    #[command(subcommand)]
    Maxent(maxent::MaxentCommand),
    /// Dyck-language dataset tools.
    #[command(subcommand)]
    Dyck(dyck::DyckCommand),
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Train(a) => train::run(a),
        Command::Sample(a) => sample::run(a),
        Command::Evaluate(a) => evaluate::run(a),
        Command::Accountant(a) => accountant::run(a),
        Command::Sweep(a) => sweep::run(a),
        Command::Maxent(c) => maxent::run(c),
        Command::Dyck(c) => dyck::run(c),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or_default().trim_start_matches("error: ");
            let err = CliError::usage("usage", first, json!({ "kind": e.kind().to_string() }));
            eprintln!("{}", err.to_json());
            std::process::exit(EXIT_USAGE);
        }
    };
    if let Err(err) = dispatch(&cli) {
        eprintln!("{}", err.to_json());
        std::process::exit(err.exit);
    }
}
