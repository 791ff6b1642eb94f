use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::Args;
use dptab::data::{Schema, Table};
use dptab::metrics::{evaluate, MetricReport, Task};
use serde::Serialize;
use serde_json::json;

use super::evaluate::TaskArg;
use super::sample::sample_table;
use super::train::{resolve_inputs, train_checkpoint, TrainSummary};
use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Epsilon,
    Sigma,
    Lr,
    Epochs,
    Batch,
    Clip,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Base run configuration.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub param: SweepParam,
    /// Comma-separated values for the swept parameter.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
    /// Comma-separated seeds; each (value, seed) pair is one run.
    #[arg(long, value_delimiter = ',', required = true)]
    pub seeds: Vec<u64>,
    /// Rows sampled per run (defaults to the number of real rows).
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long, requires = "task")]
    pub target: Option<String>,
    #[arg(long, value_enum, requires = "target")]
    pub task: Option<TaskArg>,
    /// JSON-lines output; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run independent (value, seed) pairs on all available cores.
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub kind: &'static str,
    pub param: SweepParam,
    pub value: f64,
    pub seed: u64,
    pub train: TrainSummary,
    pub metrics: MetricReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryRecord {
    pub kind: &'static str,
    pub param: SweepParam,
    pub value: f64,
    pub runs: usize,
    pub median_best_val_nll: f64,
    pub median_det: f64,
    pub median_ks: Option<f64>,
    pub median_cs: Option<f64>,
}

/// Applies one swept value to a copy of the base configuration.
pub fn with_param(base: &RunConfig, param: SweepParam, value: f64, seed: u64) -> Result<RunConfig, CliError> {
    let mut c = base.clone();
    c.seed = seed;
    let t = &mut c.training;
    match param {
        SweepParam::Epsilon => {
            c.privacy.epsilon = Some(value);
            c.privacy.sigma = None;
            c.privacy.non_private = false;
        }
        SweepParam::Sigma => {
            c.privacy.sigma = Some(value);
            c.privacy.epsilon = None;
            c.privacy.non_private = false;
        }
        SweepParam::Lr => t.lr = value,
        SweepParam::Epochs => t.epochs = value,
        SweepParam::Batch => {
            if value.fract() != 0.0 || value < 1.0 {
                return Err(CliError::usage("invalid_argument", "batch values must be positive integers", json!({ "value": value })));
            }
            t.batch = value as usize;
        }
        SweepParam::Clip => t.clip = value,
    }
    c.train_config()?;
    Ok(c)
}

/// One train → sample → evaluate cycle; the same steps the three commands perform.
pub fn run_one(
    config: &RunConfig,
    schema: &Schema,
    real: &Table,
    n_samples: usize,
    target: Option<(&str, Task)>,
) -> Result<(TrainSummary, MetricReport), CliError> {
    let trained = train_checkpoint(config, schema, real, |_| {})?;
    let synth = sample_table(&trained.checkpoint, n_samples, 1.0, config.seed)?;
    let metrics = evaluate(real, &synth, schema, target, config.seed)?;
    Ok((trained.summary, metrics))
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn median_opt(xs: Vec<Option<f64>>) -> Option<f64> {
    xs.into_iter().collect::<Option<Vec<_>>>().map(median)
}

pub fn run(args: &SweepArgs) -> Result<(), CliError> {
    let base = RunConfig::load(&args.config)?;
    let (schema, real) = resolve_inputs(&base, args.data.as_deref(), args.schema.as_deref())?;
    let target = args.target.as_deref().zip(args.task.map(Task::from));
    let n_samples = args.n_samples.unwrap_or(real.len());
    for (i, v) in args.values.iter().enumerate() {
        if args.values[..i].contains(v) {
            return Err(CliError::usage("invalid_argument", "duplicate sweep value", json!({ "value": v })));
        }
    }
    let mut jobs = Vec::new();
    for &value in &args.values {
        for &seed in &args.seeds {
            jobs.push((value, with_param(&base, args.param, value, seed)?));
        }
    }

    let results: Vec<Mutex<Option<Result<(TrainSummary, MetricReport), CliError>>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    let work = |next: &AtomicUsize| loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some((_, cfg)) = jobs.get(i) else { break };
        log::info!("sweep run {}/{}", i + 1, jobs.len());
        *results[i].lock().unwrap() = Some(run_one(cfg, &schema, &real, n_samples, target));
    };
    let next = AtomicUsize::new(0);
    let threads = if args.parallel {
        std::thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len())
    } else {
        1
    };
    std::thread::scope(|s| {
        for _ in 1..threads {
            s.spawn(|| work(&next));
        }
        work(&next);
    });

    let mut lines = Vec::new();
    let mut runs = Vec::new();
    for ((value, cfg), slot) in jobs.iter().zip(results) {
        let (train, metrics) = slot.into_inner().unwrap().expect("every job ran")?;
        let rec = RunRecord { kind: "run", param: args.param, value: *value, seed: cfg.seed, train, metrics };
        lines.push(serde_json::to_string(&rec).expect("record"));
        runs.push(rec);
    }
    for &value in &args.values {
        let group: Vec<&RunRecord> = runs.iter().filter(|r| r.value == value).collect();
        let summary = SummaryRecord {
            kind: "summary",
            param: args.param,
            value,
            runs: group.len(),
            median_best_val_nll: median(group.iter().map(|r| r.train.best_val_nll).collect()),
            median_det: median(group.iter().map(|r| r.metrics.det).collect()),
            median_ks: median_opt(group.iter().map(|r| r.metrics.ks).collect()),
            median_cs: median_opt(group.iter().map(|r| r.metrics.cs).collect()),
        };
        lines.push(serde_json::to_string(&summary).expect("summary"));
    }
    match &args.out {
        Some(path) => {
            let mut w = super::create(path)?;
            for l in &lines {
                writeln!(w, "{l}").map_err(|e| CliError::io(path, e))?;
            }
            w.flush().map_err(|e| CliError::io(path, e))
        }
        None => {
            for l in &lines {
                println!("{l}");
            }
            Ok(())
        }
    }
}
