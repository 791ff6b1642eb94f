use std::path::PathBuf;

use clap::{Args, Subcommand};
use dptab::dyck::{dyck_schema, generate_dyck, strings_to_table, table_to_strings, validity_rate, DyckError};
use dptab::data::read_csv;
use serde::Serialize;
use serde_json::json;

use super::{emit_json, save_table};
use crate::error::CliError;

#[derive(Debug, Subcommand)]
pub enum DyckCommand {
    /// Write every balanced string of length k as a CSV with columns c1..ck.
    Gen(GenArgs),
    /// Report the fraction of balanced rows in a CSV.
    Score(ScoreArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the matching schema JSON here.
    #[arg(long)]
    pub schema_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
}

#[derive(Debug, Serialize)]
struct Score {
    n: usize,
    valid: usize,
    rate: f64,
}

fn dyck_error(e: DyckError) -> CliError {
    match e {
        DyckError::EmptySample => CliError::runtime("empty_sample", e.to_string(), json!({})),
        other => CliError::usage("invalid_argument", other.to_string(), json!({})),
    }
}

pub fn run(cmd: &DyckCommand) -> Result<(), CliError> {
    match cmd {
        DyckCommand::Gen(args) => {
            let strings = generate_dyck(args.k).map_err(dyck_error)?;
            let schema = dyck_schema(args.k)
                .map_err(|e| CliError::usage("invalid_argument", e.to_string(), json!({ "k": args.k })))?;
            let table = strings_to_table(&strings).map_err(dyck_error)?;
            save_table(&args.out, &schema, &table)?;
            if let Some(path) = &args.schema_out {
                std::fs::write(path, schema.to_json()).map_err(|e| CliError::io(path, e))?;
            }
            emit_json(&json!({ "k": args.k, "rows": strings.len() }), None)
        }
        DyckCommand::Score(args) => {
            let path = &args.input;
            let not_found = |e: std::io::Error| {
                let code = if e.kind() == std::io::ErrorKind::NotFound { "data_not_found" } else { "io_error" };
                CliError::usage(code, e.to_string(), json!({ "path": path.display().to_string() }))
            };
            let text = std::fs::read_to_string(path).map_err(not_found)?;
            let width = text.lines().next().map_or(0, |h| h.split(',').count());
            let schema = dyck_schema(width)
                .map_err(|e| CliError::usage("invalid_data", e.to_string(), json!({})))?;
            let table = read_csv(text.as_bytes(), &schema).map_err(|e| CliError::input("data", path, e))?;
            let strings = table_to_strings(&table);
            let rate = validity_rate(&strings).map_err(dyck_error)?;
            let valid = strings.iter().filter(|s| dptab::dyck::is_valid_dyck(s) == Ok(true)).count();
            emit_json(&Score { n: strings.len(), valid, rate }, None)
        }
    }
}
