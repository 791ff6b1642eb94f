//! Fidelity, detectability and downstream-utility scores for synthetic tables.

mod learners;
mod stats;


use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, Schema, Table, Value};

pub use learners::{feature_matrix, macro_f1, ols_fit, ols_predict, DecisionTree, LogisticRegression};
pub use stats::{chi_square_statistic, cs_pvalue, ks_complement, marginal_tvd, roc_auc};

pub const DETECTION_FOLDS: usize = 3;
pub const DETECTION_ITERATIONS: usize = 500;
pub const DETECTION_LAMBDA: f64 = 1e-3;
pub const TREE_MAX_DEPTH: usize = 8;
pub const TREE_MIN_LEAF: usize = 5;
pub const TEST_FRACTION: f64 = 0.3;
pub const RIDGE_JITTER: f64 = 1e-8;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("column is empty")]
    EmptyColumn,
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("target column '{0}' is not in the schema")]
    TargetMissing(String),
    #[error("target column '{0}' is not numeric")]
    TargetNotNumeric(String),
    #[error("target column '{0}' is not categorical")]
    TargetNotCategorical(String),
    #[error("real test target has zero variance; r² is undefined")]
    ZeroVarianceTarget,
    #[error("the real-data test split is empty")]
    EmptyTestSplit,
    #[error("cell type does not match column '{column}'")]
    WrongKind { column: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Clf,
    Reg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnReport {
    pub name: String,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tvd: Option<f64>,
}

/// `ks` averages numeric columns and `cs` categorical ones; each is null when
/// the schema has no column of that kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub ks: Option<f64>,
    pub cs: Option<f64>,
    pub det: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ml_clf_f1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ml_reg_r2: Option<f64>,
    pub columns: Vec<ColumnReport>,
}

fn numbers(table: &Table, schema: &Schema, col: usize) -> Result<Vec<f64>, MetricsError> {
    table
        .column(col)
        .map(|v| v.as_number())
        .collect::<Option<_>>()
        .ok_or_else(|| MetricsError::WrongKind { column: schema.columns()[col].name.clone() })
}

fn categories(table: &Table, schema: &Schema, col: usize) -> Result<Vec<u32>, MetricsError> {
    table
        .column(col)
        .map(|v| v.as_category())
        .collect::<Option<_>>()
        .ok_or_else(|| MetricsError::WrongKind { column: schema.columns()[col].name.clone() })
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// 1 − mean fold ROC-AUC of a logistic regression separating real (0) from
/// synthetic (1) rows, each fold AUC oriented to be at least ½.
pub fn detection_score(
    real: &Table,
    synth: &Table,
    schema: &Schema,
    seed: u64,
) -> Result<f64, MetricsError> {
    for t in [real, synth] {
        if t.len() < DETECTION_FOLDS {
            return Err(MetricsError::TooFewRows { needed: DETECTION_FOLDS, got: t.len() });
        }
    }
    let mut x = feature_matrix(real, schema, None)?;
    x.extend(feature_matrix(synth, schema, None)?);
    let y: Vec<bool> = (0..x.len()).map(|i| i >= real.len()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0usize; x.len()];
    for class in [false, true] {
        let mut members: Vec<usize> = (0..x.len()).filter(|&i| y[i] == class).collect();
        members.shuffle(&mut rng);
        for (pos, &i) in members.iter().enumerate() {
            fold[i] = pos % DETECTION_FOLDS;
        }
    }

    let mut aucs = Vec::with_capacity(DETECTION_FOLDS);
    for k in 0..DETECTION_FOLDS {
        let (mut tx, mut ty, mut vx, mut vy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for i in 0..x.len() {
            if fold[i] == k {
                vx.push(x[i].clone());
                vy.push(y[i]);
            } else {
                tx.push(x[i].clone());
                ty.push(y[i]);
            }
        }
        let model = LogisticRegression::fit(&tx, &ty, DETECTION_LAMBDA, DETECTION_ITERATIONS);
        let scores: Vec<f64> = vx.iter().map(|r| model.decision(r)).collect();
        let auc = roc_auc(&vy, &scores).expect("stratified folds hold both classes");
        aucs.push(auc.max(1.0 - auc));
    }
    Ok(1.0 - aucs.iter().sum::<f64>() / aucs.len() as f64)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Whether real row `i` belongs to the held-out 30% test split for `seed`.
pub fn in_test_split(seed: u64, i: usize) -> bool {
    let h = splitmix64(seed ^ splitmix64(i as u64));
    ((h >> 11) as f64) / ((1u64 << 53) as f64) < TEST_FRACTION
}

fn test_rows(real: &Table, seed: u64) -> Result<Table, MetricsError> {
    let rows: Vec<Vec<Value>> = real
        .rows
        .iter()
        .enumerate()
        .filter(|(i, _)| in_test_split(seed, *i))
        .map(|(_, r)| r.clone())
        .collect();
    if rows.is_empty() {
        return Err(MetricsError::EmptyTestSplit);
    }
    Ok(Table { rows })
}

fn target_index(schema: &Schema, target: &str) -> Result<usize, MetricsError> {
    schema.index_of(target).ok_or_else(|| MetricsError::TargetMissing(target.to_string()))
}

/// Macro-F1 on the real test split of a depth-8 CART tree trained on `synth`.
pub fn ml_efficacy_clf(
    synth: &Table,
    real: &Table,
    schema: &Schema,
    target: &str,
    seed: u64,
) -> Result<f64, MetricsError> {
    let t = target_index(schema, target)?;
    if schema.columns()[t].is_numeric() {
        return Err(MetricsError::TargetNotCategorical(target.to_string()));
    }
    let train_y = categories(synth, schema, t)?;
    let test = test_rows(real, seed)?;
    let test_y = categories(&test, schema, t)?;
    if train_y.iter().all(|&c| Some(&c) == train_y.first()) {
        log::warn!("synthetic target '{target}' has a single class; efficacy F1 set to 0");
        return Ok(0.0);
    }
    let train_x = feature_matrix(synth, schema, Some(t))?;
    let tree = DecisionTree::fit(&train_x, &train_y, TREE_MAX_DEPTH, TREE_MIN_LEAF);
    let pred: Vec<u32> =
        feature_matrix(&test, schema, Some(t))?.iter().map(|r| tree.predict(r)).collect();
    Ok(macro_f1(&test_y, &pred))
}

/// r² on the real test split of least squares trained on `synth`.
pub fn ml_efficacy_reg(
    synth: &Table,
    real: &Table,
    schema: &Schema,
    target: &str,
    seed: u64,
) -> Result<f64, MetricsError> {
    let t = target_index(schema, target)?;
    if !schema.columns()[t].is_numeric() {
        return Err(MetricsError::TargetNotNumeric(target.to_string()));
    }
    let train_y = numbers(synth, schema, t)?;
    if train_y.is_empty() {
        return Err(MetricsError::TooFewRows { needed: 1, got: 0 });
    }
    let test = test_rows(real, seed)?;
    let test_y = numbers(&test, schema, t)?;
    let y_mean = mean(&test_y).expect("nonempty split");
    let ss_tot: f64 = test_y.iter().map(|y| (y - y_mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(MetricsError::ZeroVarianceTarget);
    }
    let coef = ols_fit(&feature_matrix(synth, schema, Some(t))?, &train_y, RIDGE_JITTER);
    let ss_res: f64 = feature_matrix(&test, schema, Some(t))?
        .iter()
        .zip(&test_y)
        .map(|(r, y)| (y - ols_predict(&coef, r)).powi(2))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Full report: per-column KS / CS / TVD, their averages, detection, and the
/// efficacy score for `target` when given.
pub fn evaluate(
    real: &Table,
    synth: &Table,
    schema: &Schema,
    target: Option<(&str, Task)>,
    seed: u64,
) -> Result<MetricReport, MetricsError> {
    if let Some((name, task)) = target {
        let t = target_index(schema, name)?;
        match (task, schema.columns()[t].is_numeric()) {
            (Task::Reg, false) => return Err(MetricsError::TargetNotNumeric(name.to_string())),
            (Task::Clf, true) => return Err(MetricsError::TargetNotCategorical(name.to_string())),
            _ => {}
        }
    }
    let mut columns = Vec::with_capacity(schema.len());
    let (mut ks_all, mut cs_all) = (Vec::new(), Vec::new());
    for (col, spec) in schema.columns().iter().enumerate() {
        let report = match &spec.kind {
            ColumnKind::Numeric { .. } => {
                let ks = ks_complement(&numbers(real, schema, col)?, &numbers(synth, schema, col)?)?;
                ks_all.push(ks);
                ColumnReport { name: spec.name.clone(), kind: "numeric".into(), ks: Some(ks), cs: None, tvd: None }
            }
            ColumnKind::Categorical { categories: cats } => {
                let (r, s) = (categories(real, schema, col)?, categories(synth, schema, col)?);
                let cs = cs_pvalue(&r, &s, cats.len())?;
                cs_all.push(cs);
                ColumnReport {
                    name: spec.name.clone(),
                    kind: "categorical".into(),
                    ks: None,
                    cs: Some(cs),
                    tvd: Some(marginal_tvd(&r, &s)?),
                }
            }
        };
        columns.push(report);
    }
    let det = detection_score(real, synth, schema, seed)?;
    let (mut ml_clf_f1, mut ml_reg_r2) = (None, None);
    match target {
        Some((name, Task::Clf)) => ml_clf_f1 = Some(ml_efficacy_clf(synth, real, schema, name, seed)?),
        Some((name, Task::Reg)) => ml_reg_r2 = Some(ml_efficacy_reg(synth, real, schema, name, seed)?),
        None => {}
    }
    Ok(MetricReport { ks: mean(&ks_all), cs: mean(&cs_all), det, ml_clf_f1, ml_reg_r2, columns })
}
