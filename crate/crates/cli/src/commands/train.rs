use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use dptab::data::{split_train_val, EncodedDataset, Schema, Table, TokenVocab};
use dptab::model::Checkpoint;
use dptab::train::{derive_seed, train_split, TrainLogRecord, TrainOutput};
use log::info;
use serde::Serialize;
use serde_json::json;

use super::{create, emit_json, load_schema, load_table};
use crate::config::RunConfig;
use crate::error::CliError;

/// Seed stream used for the train/validation split.
const STREAM_SPLIT: u64 = 1;

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training rows as CSV (defaults to the config's `data`).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Schema JSON (defaults to the config's `schema`).
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Run configuration JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Checkpoint output path.
    #[arg(long)]
    pub out: PathBuf,
    /// Training log output (JSON lines).
    #[arg(long)]
    pub log: Option<PathBuf>,
}

/// Log line without wall-clock time, so logs are reproducible byte for byte.
#[derive(Serialize)]
struct LogLine {
    step: u64,
    batch_size: usize,
    train_nll: Option<f64>,
    val_nll: f64,
    epsilon: Option<f64>,
}

impl From<&TrainLogRecord> for LogLine {
    fn from(r: &TrainLogRecord) -> Self {
        Self {
            step: r.step,
            batch_size: r.batch_size,
            train_nll: r.train_nll,
            val_nll: r.val_nll,
            epsilon: r.epsilon,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    #[serde(rename = "final")]
    pub is_final: bool,
    pub steps: u64,
    pub q: f64,
    pub sigma: Option<f64>,
    pub delta: Option<f64>,
    pub epsilon: Option<f64>,
    pub best_step: u64,
    pub best_val_nll: f64,
}

pub struct Trained {
    pub checkpoint: Checkpoint,
    pub summary: TrainSummary,
}

pub fn resolve_inputs(
    config: &RunConfig,
    data: Option<&Path>,
    schema: Option<&Path>,
) -> Result<(Schema, Table), CliError> {
    let missing = |what: &str| {
        CliError::usage("missing_argument", format!("no {what} path in flags or config"), json!({}))
    };
    let schema_path = schema.or(config.schema.as_deref()).ok_or_else(|| missing("schema"))?;
    let data_path = data.or(config.data.as_deref()).ok_or_else(|| missing("data"))?;
    let schema = load_schema(schema_path)?;
    let table = load_table(data_path, &schema)?;
    Ok((schema, table))
}

/// Encodes, splits, trains, and packages the best-validation model.
pub fn train_checkpoint(
    config: &RunConfig,
    schema: &Schema,
    table: &Table,
    mut log: impl FnMut(&str),
) -> Result<Trained, CliError> {
    let run = config.train_config()?;
    let vocab = if config.training.share_tokens {
        TokenVocab::shared(schema)
    } else {
        TokenVocab::new(schema, config.training.bins)
    }
    .map_err(|e| CliError::usage("invalid_schema", e.to_string(), json!({})))?;
    let data = EncodedDataset::encode(table, schema, &vocab)
        .map_err(|e| CliError::usage("invalid_data", e.to_string(), json!({})))?;
    let (train_set, val_set) = split_train_val(&data, derive_seed(run.seed, STREAM_SPLIT), run.val_frac)
        .map_err(|e| CliError::usage("invalid_data", e.to_string(), json!({})))?;
    let out: TrainOutput<f32> = train_split(&run, &train_set, &val_set, &vocab, |r| {
        info!("step {} val_nll {:.4} epsilon {:?}", r.step, r.val_nll, r.epsilon);
        log(&serde_json::to_string(&LogLine::from(r)).expect("log line"));
    })?;
    let summary = TrainSummary {
        is_final: true,
        steps: out.steps,
        q: out.q,
        sigma: out.sigma,
        delta: out.sigma.map(|_| run.delta),
        epsilon: out.epsilon,
        best_step: out.best_step,
        best_val_nll: out.best_val_nll,
    };
    log(&serde_json::to_string(&summary).expect("summary line"));
    let checkpoint = Checkpoint::new(&out.best_model, schema, &vocab, &out.column_order)?;
    Ok(Trained { checkpoint, summary })
}

pub fn run(args: &TrainArgs) -> Result<(), CliError> {
    let config = RunConfig::load(&args.config)?;
    let (schema, table) = resolve_inputs(&config, args.data.as_deref(), args.schema.as_deref())?;
    let mut log_file = args.log.as_deref().map(create).transpose()?;
    let mut log_err = None;
    let trained = train_checkpoint(&config, &schema, &table, |line| {
        if let Some(w) = log_file.as_mut() {
            if let Err(e) = writeln!(w, "{line}") {
                log_err.get_or_insert(e);
            }
        }
    })?;
    if let (Some(path), Some(w)) = (args.log.as_deref(), log_file.as_mut()) {
        if let Some(e) = log_err {
            return Err(CliError::io(path, e));
        }
        w.flush().map_err(|e| CliError::io(path, e))?;
    }
    trained.checkpoint.save(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    emit_json(&trained.summary, None)
}
