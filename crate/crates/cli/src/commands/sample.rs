use std::path::PathBuf;

use clap::Args;
use dptab::data::Table;
use dptab::model::Checkpoint;
use serde_json::json;

use super::save_table;
use crate::error::CliError;

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Number of rows to draw.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn sample_table(
    checkpoint: &Checkpoint,
    n: usize,
    temperature: f64,
    seed: u64,
) -> Result<Table, CliError> {
    let model = checkpoint.model::<f32>()?;
    let tokens = model.sample_tokens(n, temperature, seed).map_err(|e| {
        CliError::usage("invalid_argument", e.to_string(), json!({ "temperature": temperature }))
    })?;
    Ok(checkpoint.decode(&tokens)?)
}

pub fn run(args: &SampleArgs) -> Result<(), CliError> {
    let checkpoint = Checkpoint::load(&args.model).map_err(|e| CliError::checkpoint(&args.model, e))?;
    let table = sample_table(&checkpoint, args.n, args.temperature, args.seed)?;
    save_table(&args.out, &checkpoint.header.schema, &table)
}
