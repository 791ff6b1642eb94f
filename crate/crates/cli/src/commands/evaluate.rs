use std::path::PathBuf;

use clap::Args;
use dptab::metrics::{evaluate, MetricReport, Task};
use serde_json::json;

use super::{emit_json, load_schema, load_table};
use crate::error::CliError;

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub real: PathBuf,
    #[arg(long)]
    pub synth: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    /// Target column for the ML-efficacy score (needs --task).
    #[arg(long, requires = "task")]
    pub target: Option<String>,
    #[arg(long, value_enum, requires = "target")]
    pub task: Option<TaskArg>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum TaskArg {
    Clf,
    Reg,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Clf => Task::Clf,
            TaskArg::Reg => Task::Reg,
        }
    }
}

pub fn run(args: &EvaluateArgs) -> Result<(), CliError> {
    let schema = load_schema(&args.schema)?;
    let real = load_table(&args.real, &schema)?;
    let synth = load_table(&args.synth, &schema)?;
    if let Some(t) = &args.target {
        if schema.index_of(t).is_none() {
            return Err(CliError::usage(
                "target_missing",
                format!("target column '{t}' is not in the schema"),
                json!({ "target": t }),
            ));
        }
    }
    let target = args.target.as_deref().zip(args.task.map(Task::from));
    let report: MetricReport = evaluate(&real, &synth, &schema, target, args.seed)?;
    emit_json(&report, args.out.as_deref())
}
