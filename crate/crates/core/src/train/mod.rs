//! Training loop: Poisson batches, per-example clipping, Gaussian noise and
//! Adam, with validation tracking and a privacy ledger.

use std::time::Instant;

use log::{debug, info};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{
    batch_mean_gradient, for_each_example_gradient, AutodiffError, Graph, NodeId, Real,
};
use crate::data::{split_train_val, ColumnOrder, DataError, EncodedDataset, TokenVocab};
use crate::model::{layout_for, Model, ModelConfig, ModelError};
use crate::privacy::{
    adam_step, add_noise_and_scale, calibrate_sigma, l2_norm, poisson_sample, AccountantState,
    AdamConfig, AdamState, PrivacyError,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("non-finite value in {op} at step {step}")]
    NonFinite { step: u64, op: &'static str },
    #[error("validation set is empty")]
    EmptyValidation,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Privacy(#[from] PrivacyError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Transformer shape; the vocabulary and column count come from the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub n_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            n_layers: 3,
            d_model: 128,
            n_heads: 4,
        }
    }
}

impl Architecture {
    pub fn config(&self, vocab_size: usize, num_columns: usize) -> ModelConfig {
        ModelConfig {
            n_layers: self.n_layers,
            d_model: self.d_model,
            n_heads: self.n_heads,
            vocab_size,
            num_columns,
        }
    }
}

/// How gradients are privatized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrivacyMode {
    /// Plain minibatch Adam on the mean loss of each Poisson batch: no
    /// clipping, no noise, no accounting.
    NonPrivate,
    /// DP-SGD with an explicit noise multiplier (zero allowed).
    Sigma(f64),
    /// DP-SGD with σ calibrated to reach this ε after all steps.
    Epsilon(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRunConfig {
    pub architecture: Architecture,
    /// `T = round(epochs · N / batch_size)` unless `steps` is set.
    pub epochs: f64,
    pub steps: Option<u64>,
    /// Expected Poisson batch size b; the sampling rate is `b / N`.
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub clip_norm: f64,
    pub privacy: PrivacyMode,
    pub delta: f64,
    pub eval_interval: u64,
    pub column_order: ColumnOrder,
    pub val_frac: f64,
    pub seed: u64,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::default(),
            epochs: 1.0,
            steps: None,
            batch_size: 256,
            adam: AdamConfig::default(),
            clip_norm: 1.0,
            privacy: PrivacyMode::Epsilon(1.0),
            delta: 1e-9,
            eval_interval: 50,
            column_order: ColumnOrder::Given,
            val_frac: 0.01,
            seed: 0,
        }
    }
}

impl TrainRunConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.steps.is_none() && !(self.epochs > 0.0 && self.epochs.is_finite()) {
            return bad("epochs must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if self.eval_interval == 0 {
            return bad("eval interval must be at least 1");
        }
        if !(self.adam.lr > 0.0) || !(self.adam.eps >= 0.0) {
            return bad("learning rate must be positive and adam_eps non-negative");
        }
        if !(self.val_frac > 0.0 && self.val_frac < 1.0) {
            return bad("validation fraction must lie in (0, 1)");
        }
        match self.privacy {
            PrivacyMode::NonPrivate => {}
            PrivacyMode::Sigma(s) if !(s >= 0.0 && s.is_finite()) => return bad("sigma must be non-negative"),
            PrivacyMode::Epsilon(e) if !(e > 0.0) => return bad("epsilon must be positive"),
            _ => {
                if !(self.clip_norm > 0.0 && self.clip_norm.is_finite()) {
                    return bad("clip norm must be positive and finite");
                }
                if !(self.delta > 0.0 && self.delta < 1.0) {
                    return bad("delta must lie in (0, 1)");
                }
            }
        }
        Ok(())
    }

    /// Step count for a training set of `n` rows.
    pub fn total_steps(&self, n: usize) -> u64 {
        self.steps
            .unwrap_or_else(|| (self.epochs * n as f64 / self.batch_size as f64).round() as u64)
    }

    pub fn sampling_rate(&self, n: usize) -> f64 {
        (self.batch_size as f64 / n as f64).min(1.0)
    }
}

/// One line of the training log, written at every evaluation point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRecord {
    pub step: u64,
    /// Realized size of the batch used at this step.
    pub batch_size: usize,
    /// Mean row NLL over that batch before the update.
    pub train_nll: Option<f64>,
    pub val_nll: f64,
    /// ε spent after this step; `None` when training is not private.
    pub epsilon: Option<f64>,
    pub wall_ms: u64,
}

pub struct TrainOutput<T: Real> {
    pub final_model: Model<T>,
    pub best_model: Model<T>,
    pub best_val_nll: f64,
    pub best_step: u64,
    pub log: Vec<TrainLogRecord>,
    pub steps: u64,
    pub q: f64,
    pub sigma: Option<f64>,
    pub epsilon: Option<f64>,
    /// `column_order[j]` is the schema column at model position `j`.
    pub column_order: Vec<usize>,
}

/// Seed for an independent purpose-specific stream.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng.next_u64()
}

const STREAM_SPLIT: u64 = 1;
const STREAM_INIT: u64 = 2;
const STREAM_BATCH: u64 = 3;
const STREAM_NOISE: u64 = 4;

const EVAL_CHUNK: usize = 64;

/// Exact mean row NLL over `data` (rows in model order).
pub fn evaluate_nll<T: Real>(model: &Model<T>, data: &EncodedDataset) -> Result<f64, TrainError> {
    if data.is_empty() {
        return Err(TrainError::EmptyValidation);
    }
    let rows: Vec<&[u32]> = data.rows().collect();
    Ok(model.total_nll(&rows, EVAL_CHUNK)? / rows.len() as f64)
}

/// Splits off a validation set with the configured fraction, then trains.
pub fn train<T: Real>(
    config: &TrainRunConfig,
    data: &EncodedDataset,
    vocab: &TokenVocab,
) -> Result<TrainOutput<T>, TrainError> {
    let (train_set, val_set) = split_train_val(data, derive_seed(config.seed, STREAM_SPLIT), config.val_frac)?;
    train_split(config, &train_set, &val_set, vocab, |_| {})
}

fn nonfinite(step: u64) -> impl Fn(AutodiffError) -> TrainError {
    move |e| match e {
        AutodiffError::NonFinite { op } => TrainError::NonFinite { step, op },
        other => TrainError::Model(ModelError::Autodiff(other)),
    }
}

/// Trains on `train_set` and tracks `val_set`; both are in schema column
/// order. `observe` sees every log record as it is produced.
pub fn train_split<T: Real>(
    config: &TrainRunConfig,
    train_set: &EncodedDataset,
    val_set: &EncodedDataset,
    vocab: &TokenVocab,
    mut observe: impl FnMut(&TrainLogRecord),
) -> Result<TrainOutput<T>, TrainError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::Data(DataError::TooFewRows { needed: 1, got: 0 }));
    }
    if val_set.is_empty() {
        return Err(TrainError::EmptyValidation);
    }
    let order = config.column_order.permutation(vocab);
    let train_rows = train_set.permute_columns(&order);
    let val_rows = val_set.permute_columns(&order);
    let model_config = config.architecture.config(vocab.total(), vocab.num_columns());
    let mut model = Model::<T>::init(
        model_config,
        layout_for(vocab, &order),
        derive_seed(config.seed, STREAM_INIT),
    )?;
    for row in train_rows.rows().chain(val_rows.rows()) {
        model.check_row(row)?;
    }

    let n = train_rows.len();
    let steps = config.total_steps(n);
    let q = config.sampling_rate(n);
    let sigma = match config.privacy {
        PrivacyMode::NonPrivate => None,
        PrivacyMode::Sigma(s) => Some(s),
        PrivacyMode::Epsilon(e) => Some(calibrate_sigma(e, config.delta, q, steps)?),
    };
    let accountant = match sigma {
        Some(s) if s > 0.0 => Some(AccountantState::new(q, s)?),
        _ => None,
    };
    let spent = |t: u64| -> Option<f64> {
        match (sigma, &accountant) {
            (None, _) => None,
            (Some(_), Some(acc)) => Some(acc.epsilon(t, config.delta)),
            (Some(_), None) => Some(if t == 0 { 0.0 } else { f64::INFINITY }),
        }
    };
    info!(
        "training {} rows for {steps} steps, q = {q:.5}, sigma = {sigma:?}, {} parameters",
        n,
        model.params().len()
    );

    let mut batch_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_BATCH));
    let mut noise_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_NOISE));
    let mut adam = AdamState::<T>::new(model.params().len());
    let start = Instant::now();
    let mut log = Vec::new();

    let mut best_val = evaluate_nll(&model, &val_rows)?;
    let mut best_params = model.params().clone();
    let mut best_step = 0;
    let first = TrainLogRecord {
        step: 0,
        batch_size: 0,
        train_nll: None,
        val_nll: best_val,
        epsilon: spent(0),
        wall_ms: 0,
    };
    observe(&first);
    log.push(first);

    for t in 1..=steps {
        let batch = poisson_sample(n, q, &mut batch_rng);
        let rows: Vec<&[u32]> = batch.iter().map(|&i| train_rows.row(i)).collect();
        let mut loss_sum = 0.0;
        let grad = match sigma {
            None => {
                if rows.is_empty() {
                    None
                } else {
                    let loss = |g: &mut Graph<'_, T>, row: &&[u32]| -> Result<NodeId, AutodiffError> {
                        model.loss_node_prechecked(g, &[*row])
                    };
                    let grad = batch_mean_gradient(model.params(), &rows, &loss).map_err(nonfinite(t))?;
                    if log_due(t, steps, config.eval_interval) {
                        loss_sum = model.total_nll(&rows, EVAL_CHUNK)?;
                    }
                    Some(grad)
                }
            }
            Some(s) => {
                // The clipped sum is accumulated in units of C and rescaled
                // once, so fully clipped batches give bit-identical sums for
                // every C.
                let c = config.clip_norm;
                let mut sum = vec![T::zero(); model.params().len()];
                let loss = |g: &mut Graph<'_, T>, row: &&[u32]| -> Result<NodeId, AutodiffError> {
                    model.loss_node_prechecked(g, &[*row])
                };
                for_each_example_gradient(model.params(), &rows, &loss, |_, value, g| {
                    loss_sum += value.as_f64();
                    let scale = T::from_f64((1.0 / c).min(1.0 / l2_norm(&g)));
                    for (acc, x) in sum.iter_mut().zip(g) {
                        *acc += x * scale;
                    }
                })
                .map_err(nonfinite(t))?;
                add_noise_and_scale(&mut sum, 1.0, s, config.batch_size as f64 / c, &mut noise_rng);
                Some(sum)
            }
        };
        if let Some(grad) = grad {
            if grad.iter().any(|x| !x.is_finite()) {
                return Err(TrainError::NonFinite { step: t, op: "gradient" });
            }
            adam_step(&mut adam, model.params_mut().flat_mut(), &grad, &config.adam)?;
        }

        if log_due(t, steps, config.eval_interval) {
            let val_nll = evaluate_nll(&model, &val_rows)?;
            if !val_nll.is_finite() {
                return Err(TrainError::NonFinite { step: t, op: "validation" });
            }
            if val_nll < best_val {
                best_val = val_nll;
                best_params = model.params().clone();
                best_step = t;
            }
            let record = TrainLogRecord {
                step: t,
                batch_size: rows.len(),
                train_nll: (!rows.is_empty()).then(|| loss_sum / rows.len() as f64),
                val_nll,
                epsilon: spent(t),
                wall_ms: start.elapsed().as_millis() as u64,
            };
            debug!("{}", serde_json::to_string(&record).unwrap_or_default());
            observe(&record);
            log.push(record);
        }
    }

    let best_model = Model::from_params(model_config, model.layout().to_vec(), best_params)?;
    Ok(TrainOutput {
        final_model: model,
        best_model,
        best_val_nll: best_val,
        best_step,
        log,
        steps,
        q,
        sigma,
        epsilon: spent(steps),
        column_order: order,
    })
}

fn log_due(t: u64, steps: u64, interval: u64) -> bool {
    t % interval == 0 || t == steps
}
