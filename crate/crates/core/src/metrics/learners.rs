//! Small reference learners used by the detection and efficacy metrics.

use crate::data::{ColumnKind, Schema, Table, Value};

use super::MetricsError;

/// One-hot categoricals and min-max scaled numerics (bounds from the schema),
/// skipping `exclude`.
pub fn feature_matrix(
    table: &Table,
    schema: &Schema,
    exclude: Option<usize>,
) -> Result<Vec<Vec<f64>>, MetricsError> {
    table
        .rows
        .iter()
        .map(|row| {
            let mut x = Vec::new();
            for (col, spec) in schema.columns().iter().enumerate() {
                if Some(col) == exclude {
                    continue;
                }
                match (&spec.kind, row[col]) {
                    (ColumnKind::Categorical { categories }, Value::Category(c)) => {
                        let start = x.len();
                        x.resize(start + categories.len(), 0.0);
                        x[start + c as usize] = 1.0;
                    }
                    (ColumnKind::Numeric { min, max, .. }, Value::Number(v)) => {
                        x.push((v - min) / (max - min));
                    }
                    _ => return Err(MetricsError::WrongKind { column: spec.name.clone() }),
                }
            }
            Ok(x)
        })
        .collect()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// L2-regularized logistic regression fit by full-batch gradient descent.
#[derive(Debug, Clone)]
pub struct LogisticRegression {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticRegression {
    /// Minimizes mean log loss + λ/2‖w‖² (bias unpenalized) with step size
    /// 1/L, L the smoothness bound ¼·max‖(x,1)‖² + λ.
    pub fn fit(x: &[Vec<f64>], y: &[bool], lambda: f64, iterations: usize) -> Self {
        let d = x.first().map_or(0, Vec::len);
        let n = x.len() as f64;
        let max_sq = x.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>() + 1.0).fold(0.0, f64::max);
        let lr = 1.0 / (0.25 * max_sq + lambda);
        let mut w = vec![0.0; d];
        let mut b = 0.0;
        let mut gw = vec![0.0; d];
        for _ in 0..iterations {
            gw.iter_mut().for_each(|g| *g = 0.0);
            let mut gb = 0.0;
            for (row, &label) in x.iter().zip(y) {
                let z = b + row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
                let r = sigmoid(z) - if label { 1.0 } else { 0.0 };
                gb += r;
                for (g, v) in gw.iter_mut().zip(row) {
                    *g += r * v;
                }
            }
            for (wi, gi) in w.iter_mut().zip(&gw) {
                *wi -= lr * (gi / n + lambda * *wi);
            }
            b -= lr * gb / n;
        }
        Self { weights: w, bias: b }
    }

    pub fn decision(&self, row: &[f64]) -> f64 {
        self.bias + row.iter().zip(&self.weights).map(|(a, c)| a * c).sum::<f64>()
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(u32),
    Split { feature: usize, threshold: f64, left: Box<Node>, right: Box<Node> },
}

/// CART classifier with Gini impurity and axis-aligned threshold splits.
#[derive(Debug, Clone)]
pub struct DecisionTree {
    root: Node,
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [u32],
    n_classes: usize,
    max_depth: usize,
    min_leaf: usize,
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

fn majority(counts: &[usize]) -> u32 {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best as u32
}

impl TreeBuilder<'_> {
    fn class_counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &i in idx {
            counts[self.y[i] as usize] += 1;
        }
        counts
    }

    fn build(&self, idx: &mut [usize], depth: usize) -> Node {
        let counts = self.class_counts(idx);
        let n = idx.len();
        if depth == self.max_depth || n < 2 * self.min_leaf || counts.iter().any(|&c| c == n) {
            return Node::Leaf(majority(&counts));
        }
        let parent = gini(&counts, n);
        let mut best: Option<(f64, usize, f64)> = None;
        let d = self.x[idx[0]].len();
        for f in 0..d {
            idx.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let mut left = vec![0usize; self.n_classes];
            let mut right = counts.clone();
            for split in 1..n {
                let c = self.y[idx[split - 1]] as usize;
                left[c] += 1;
                right[c] -= 1;
                let (lo, hi) = (self.x[idx[split - 1]][f], self.x[idx[split]][f]);
                if lo == hi || split < self.min_leaf || n - split < self.min_leaf {
                    continue;
                }
                let impurity = (split as f64 * gini(&left, split)
                    + (n - split) as f64 * gini(&right, n - split))
                    / n as f64;
                if impurity < parent - 1e-12 && best.is_none_or(|(b, _, _)| impurity < b) {
                    best = Some((impurity, f, 0.5 * (lo + hi)));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return Node::Leaf(majority(&counts));
        };
        let mut split = 0;
        for i in 0..n {
            if self.x[idx[i]][feature] <= threshold {
                idx.swap(i, split);
                split += 1;
            }
        }
        let (l, r) = idx.split_at_mut(split);
        Node::Split {
            feature,
            threshold,
            left: Box::new(self.build(l, depth + 1)),
            right: Box::new(self.build(r, depth + 1)),
        }
    }
}

impl DecisionTree {
    pub fn fit(x: &[Vec<f64>], y: &[u32], max_depth: usize, min_leaf: usize) -> Self {
        let n_classes = y.iter().max().map_or(1, |&m| m as usize + 1);
        let builder = TreeBuilder { x, y, n_classes, max_depth, min_leaf };
        let mut idx: Vec<usize> = (0..x.len()).collect();
        let root = if idx.is_empty() { Node::Leaf(0) } else { builder.build(&mut idx, 0) };
        Self { root }
    }

    pub fn predict(&self, row: &[f64]) -> u32 {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf(c) => return *c,
                Node::Split { feature, threshold, left, right } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }
}

/// Unweighted mean of per-class F1 over classes that occur in `truth` or `pred`.
pub fn macro_f1(truth: &[u32], pred: &[u32]) -> f64 {
    let mut classes: Vec<u32> = truth.iter().chain(pred).copied().collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.is_empty() {
        return 0.0;
    }
    let total: f64 = classes
        .iter()
        .map(|&c| {
            let tp = truth.iter().zip(pred).filter(|&(&t, &p)| t == c && p == c).count() as f64;
            let fp = truth.iter().zip(pred).filter(|&(&t, &p)| t != c && p == c).count() as f64;
            let fn_ = truth.iter().zip(pred).filter(|&(&t, &p)| t == c && p != c).count() as f64;
            if tp == 0.0 {
                0.0
            } else {
                2.0 * tp / (2.0 * tp + fp + fn_)
            }
        })
        .sum();
    total / classes.len() as f64
}

/// Least squares with intercept via the ridge-jittered normal equations.
/// Returns `[intercept, w_1, …, w_d]`.
pub fn ols_fit(x: &[Vec<f64>], y: &[f64], ridge: f64) -> Vec<f64> {
    let d = x.first().map_or(0, Vec::len) + 1;
    let mut a = vec![0.0; d * d];
    let mut rhs = vec![0.0; d];
    let mut z = vec![0.0; d];
    for (row, &t) in x.iter().zip(y) {
        z[0] = 1.0;
        z[1..].copy_from_slice(row);
        for i in 0..d {
            rhs[i] += z[i] * t;
            for j in 0..=i {
                a[i * d + j] += z[i] * z[j];
            }
        }
    }
    for i in 0..d {
        a[i * d + i] += ridge;
    }
    cholesky_solve(&mut a, &mut rhs, d);
    rhs
}

/// Solves A·x = b in place for symmetric positive definite A (lower triangle read).
fn cholesky_solve(a: &mut [f64], b: &mut [f64], d: usize) {
    for j in 0..d {
        let mut s = a[j * d + j];
        for k in 0..j {
            s -= a[j * d + k] * a[j * d + k];
        }
        let ljj = s.max(f64::MIN_POSITIVE).sqrt();
        a[j * d + j] = ljj;
        for i in j + 1..d {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= a[i * d + k] * a[j * d + k];
            }
            a[i * d + j] = s / ljj;
        }
    }
    for i in 0..d {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * d + k] * b[k];
        }
        b[i] = s / a[i * d + i];
    }
    for i in (0..d).rev() {
        let mut s = b[i];
        for k in i + 1..d {
            s -= a[k * d + i] * b[k];
        }
        b[i] = s / a[i * d + i];
    }
}

pub fn ols_predict(coef: &[f64], row: &[f64]) -> f64 {
    coef[0] + row.iter().zip(&coef[1..]).map(|(a, c)| a * c).sum::<f64>()
}
