use clap::Args;
use dptab::privacy::{calibrate_sigma, AccountantState};
use serde::Serialize;
use serde_json::json;

use super::emit_json;
use crate::error::CliError;

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("mode").required(true).args(["sigma", "epsilon"]))]
pub struct AccountantArgs {
    /// Dataset size N.
    #[arg(long)]
    pub n: u64,
    /// Expected batch size b (sampling rate b/N).
    #[arg(long)]
    pub batch: u64,
    #[arg(long)]
    pub steps: u64,
    #[arg(long, default_value_t = 1e-9)]
    pub delta: f64,
    /// Forward mode: noise multiplier to account.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Calibration mode: target ε.
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Serialize)]
struct AccountantReport {
    q: f64,
    steps: u64,
    delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    target_epsilon: Option<f64>,
    sigma: f64,
    epsilon: f64,
}

pub fn run(args: &AccountantArgs) -> Result<(), CliError> {
    if args.n == 0 || args.batch == 0 || args.batch > args.n {
        return Err(CliError::usage(
            "invalid_argument",
            "need 0 < batch <= n",
            json!({ "n": args.n, "batch": args.batch }),
        ));
    }
    if !(args.delta > 0.0 && args.delta < 1.0) {
        return Err(CliError::usage("invalid_argument", "delta must be in (0, 1)", json!({ "delta": args.delta })));
    }
    let q = args.batch as f64 / args.n as f64;
    let sigma = match (args.sigma, args.epsilon) {
        (Some(s), None) => s,
        (None, Some(e)) => calibrate_sigma(e, args.delta, q, args.steps)?,
        _ => unreachable!("clap enforces exactly one mode"),
    };
    let epsilon = AccountantState::new(q, sigma)?.epsilon(args.steps, args.delta);
    emit_json(
        &AccountantReport { q, steps: args.steps, delta: args.delta, target_epsilon: args.epsilon, sigma, epsilon },
        None,
    )
}
