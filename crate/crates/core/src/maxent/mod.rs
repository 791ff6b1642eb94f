//! Exact marginals, maximum-entropy fitting by iterative proportional fitting,
//! and numerical checks of the entropy/divergence identities for marginal-based
//! modelers.
//!
//! Joint tables are dense and row-major: the last column varies fastest.

use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;


/// Upper bound on the number of cells of a dense table.
pub const MAX_CELLS: usize = 1_000_000;

const SUM_TOL: f64 = 1e-12;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MaxentError {
    #[error("cardinalities must be nonempty and each at least 1: {0:?}")]
    InvalidCardinalities(Vec<usize>),
    #[error("table has {cells} cells, above the cap of {MAX_CELLS}")]
    TooManyCells { cells: usize },
    #[error("expected {expected} probabilities, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("probability at cell {cell} is negative or non-finite: {value}")]
    InvalidProbability { cell: usize, value: f64 },
    #[error("probabilities sum to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("invalid column subset {subset:?} for {k} columns")]
    InvalidSubset { subset: Vec<usize>, k: usize },
    #[error("marginal order {m} outside 1..={k}")]
    InvalidOrder { m: usize, k: usize },
    #[error("IPF did not converge in {sweeps} sweeps (residual {residual:e})")]
    NonConvergence { sweeps: usize, residual: f64 },
    #[error("joint has a zero cell at {cell}; a strictly positive joint is required")]
    NotStrictlyPositive { cell: usize },
}

fn cell_count(cards: &[usize]) -> Result<usize, MaxentError> {
    if cards.is_empty() || cards.contains(&0) {
        return Err(MaxentError::InvalidCardinalities(cards.to_vec()));
    }
    let mut cells = 1usize;
    for &c in cards {
        cells = cells.saturating_mul(c);
        if cells > MAX_CELLS {
            return Err(MaxentError::TooManyCells { cells });
        }
    }
    Ok(cells)
}

/// A probability table over the product of `cards.len()` finite columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseJoint {
    cards: Vec<usize>,
    probs: Vec<f64>,
}

impl DenseJoint {
    pub fn new(cards: Vec<usize>, probs: Vec<f64>) -> Result<Self, MaxentError> {
        let cells = cell_count(&cards)?;
        if probs.len() != cells {
            return Err(MaxentError::ShapeMismatch { expected: cells, got: probs.len() });
        }
        if let Some((cell, &value)) =
            probs.iter().enumerate().find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(MaxentError::InvalidProbability { cell, value });
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(MaxentError::NotNormalized { sum });
        }
        Ok(Self { cards, probs })
    }

    /// Normalizes nonnegative weights into a joint.
    pub fn from_weights(cards: Vec<usize>, mut weights: Vec<f64>) -> Result<Self, MaxentError> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(MaxentError::NotNormalized { sum: total });
        }
        for w in &mut weights {
            *w /= total;
        }
        Self::new(cards, weights)
    }

    pub fn uniform(cards: Vec<usize>) -> Result<Self, MaxentError> {
        let cells = cell_count(&cards)?;
        Ok(Self { cards, probs: vec![1.0 / cells as f64; cells] })
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn num_columns(&self) -> usize {
        self.cards.len()
    }

    pub fn num_cells(&self) -> usize {
        self.probs.len()
    }

    /// Flat index of a full assignment.
    pub fn index(&self, assignment: &[usize]) -> usize {
        assignment.iter().zip(&self.cards).fold(0, |acc, (&a, &c)| acc * c + a)
    }

    pub fn prob(&self, assignment: &[usize]) -> f64 {
        self.probs[self.index(assignment)]
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.probs.iter().all(|&p| p > 0.0)
    }

    /// Total-variation distance to a table of the same shape.
    pub fn tv(&self, other: &DenseJoint) -> f64 {
        assert_eq!(self.cards, other.cards, "tv between tables of different shape");
        tv(&self.probs, &other.probs)
    }
}

fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// For every cell of a table with `cards`, the flat index of its projection onto `subset`.
fn projection_map(cards: &[usize], subset: &[usize]) -> Vec<usize> {
    let cells: usize = cards.iter().product();
    let mut strides = vec![0usize; cards.len()];
    let mut s = 1;
    for &col in subset.iter().rev() {
        strides[col] = s;
        s *= cards[col];
    }
    let mut map = Vec::with_capacity(cells);
    let mut digits = vec![0usize; cards.len()];
    let mut idx = 0usize;
    for _ in 0..cells {
        map.push(idx);
        for col in (0..cards.len()).rev() {
            digits[col] += 1;
            idx += strides[col];
            if digits[col] < cards[col] {
                break;
            }
            idx -= strides[col] * cards[col];
            digits[col] = 0;
        }
    }
    map
}

fn check_subset(subset: &[usize], k: usize) -> Result<(), MaxentError> {
    let ok = !subset.is_empty()
        && subset.iter().all(|&c| c < k)
        && subset.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        Err(MaxentError::InvalidSubset { subset: subset.to_vec(), k })
    }
}

fn project(probs: &[f64], map: &[usize], out_cells: usize) -> Vec<f64> {
    let mut out = vec![0.0; out_cells];
    for (&p, &j) in probs.iter().zip(map) {
        out[j] += p;
    }
    out
}

/// The marginal of a joint on a sorted set of (0-based) columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    pub subset: Vec<usize>,
    pub table: DenseJoint,
}

/// Sums `joint` over every column not in `subset` (0-based, strictly increasing).
pub fn marginalize(joint: &DenseJoint, subset: &[usize]) -> Result<Marginal, MaxentError> {
    check_subset(subset, joint.num_columns())?;
    let cards: Vec<usize> = subset.iter().map(|&c| joint.cards[c]).collect();
    let map = projection_map(&joint.cards, subset);
    let probs = project(&joint.probs, &map, cards.iter().product());
    Ok(Marginal { subset: subset.to_vec(), table: DenseJoint { cards, probs } })
}

/// Every order-`m` marginal of a joint over `cards`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalSet {
    pub order: usize,
    pub cards: Vec<usize>,
    pub marginals: Vec<Marginal>,
}

impl MarginalSet {
    /// Largest disagreement between two marginals on their shared columns.
    pub fn max_inconsistency(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, a) in self.marginals.iter().enumerate() {
            for b in &self.marginals[i + 1..] {
                let shared: Vec<usize> =
                    a.subset.iter().copied().filter(|c| b.subset.contains(c)).collect();
                if shared.is_empty() {
                    continue;
                }
                let local = |m: &Marginal| -> Vec<usize> {
                    shared.iter().map(|c| m.subset.iter().position(|x| x == c).unwrap()).collect()
                };
                let pa = marginalize(&a.table, &local(a)).expect("shared subset");
                let pb = marginalize(&b.table, &local(b)).expect("shared subset");
                for (x, y) in pa.table.probs.iter().zip(&pb.table.probs) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
        worst
    }
}

/// Size-`m` subsets of `0..k` in lexicographic order.
pub fn subsets(k: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if m == 0 || m > k {
        return out;
    }
    let mut cur: Vec<usize> = (0..m).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (0..m).rev().find(|&i| cur[i] < k - m + i) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..m {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

pub fn all_marginals(joint: &DenseJoint, m: usize) -> Result<MarginalSet, MaxentError> {
    let k = joint.num_columns();
    if m == 0 || m > k {
        return Err(MaxentError::InvalidOrder { m, k });
    }
    let marginals = subsets(k, m)
        .iter()
        .map(|s| marginalize(joint, s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MarginalSet { order: m, cards: joint.cards.clone(), marginals })
}

/// Result of an IPF run.
#[derive(Debug, Clone)]
pub struct IpfFit {
    pub joint: DenseJoint,
    pub sweeps: usize,
    /// Largest per-constraint total-variation error at termination.
    pub residual: f64,
}

/// Maximum-entropy member of the marginal polytope: IPF started from the uniform joint.
pub fn ipf_maxent(set: &MarginalSet, tol: f64, max_sweeps: usize) -> Result<IpfFit, MaxentError> {
    let start = DenseJoint::uniform(set.cards.clone())?;
    ipf_from(set, &start, tol, max_sweeps)
}

/// Cyclic proportional fitting of `start` to every marginal in `set`.
pub fn ipf_from(
    set: &MarginalSet,
    start: &DenseJoint,
    tol: f64,
    max_sweeps: usize,
) -> Result<IpfFit, MaxentError> {
    if start.cards != set.cards {
        return Err(MaxentError::InvalidCardinalities(start.cards.clone()));
    }
    let maps: Vec<Vec<usize>> =
        set.marginals.iter().map(|m| projection_map(&set.cards, &m.subset)).collect();
    let mut q = start.probs.clone();
    let residual_of = |q: &[f64]| -> f64 {
        set.marginals
            .iter()
            .zip(&maps)
            .map(|(m, map)| tv(&project(q, map, m.table.num_cells()), &m.table.probs))
            .fold(0.0, f64::max)
    };
    let mut residual = residual_of(&q);
    let mut sweeps = 0;
    while residual >= tol {
        if sweeps == max_sweeps {
            return Err(MaxentError::NonConvergence { sweeps, residual });
        }
        for (m, map) in set.marginals.iter().zip(&maps) {
            let current = project(&q, map, m.table.num_cells());
            let factors: Vec<f64> = current
                .iter()
                .zip(&m.table.probs)
                .map(|(&c, &t)| if c > 0.0 { t / c } else { 1.0 })
                .collect();
            for (p, &j) in q.iter_mut().zip(map) {
                *p *= factors[j];
            }
        }
        let total: f64 = q.iter().sum();
        for p in &mut q {
            *p /= total;
        }
        sweeps += 1;
        residual = residual_of(&q);
    }
    Ok(IpfFit { joint: DenseJoint { cards: set.cards.clone(), probs: q }, sweeps, residual })
}

/// Shannon entropy in nats, with 0·ln 0 = 0.
pub fn entropy(joint: &DenseJoint) -> f64 {
    -joint.probs.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>()
}

/// KL(q‖p) in nats; `+∞` when q puts mass where p has none.
pub fn kl(q: &DenseJoint, p: &DenseJoint) -> f64 {
    assert_eq!(q.cards, p.cards, "kl between tables of different shape");
    let mut total = 0.0;
    for (&qi, &pi) in q.probs.iter().zip(&p.probs) {
        if qi == 0.0 {
            continue;
        }
        if pi == 0.0 {
            log::warn!("kl: support of q is not contained in support of p");
            return f64::INFINITY;
        }
        total += qi * (qi.ln() - pi.ln());
    }
    total
}

/// Expected log loss E_p[−ln q(x)] in nats; `+∞` when q misses part of p's support.
pub fn log_loss(p: &DenseJoint, q: &DenseJoint) -> f64 {
    assert_eq!(q.cards, p.cards, "log_loss between tables of different shape");
    let mut total = 0.0;
    for (&pi, &qi) in p.probs.iter().zip(&q.probs) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            log::warn!("log_loss: q assigns zero probability inside the support of p");
            return f64::INFINITY;
        }
        total -= pi * qi.ln();
    }
    total
}

pub const DEFAULT_IPF_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_SWEEPS: usize = 10_000;
/// Joints closer than this in total variation count as equal for the strict-gap check.
pub const EQUALITY_TV: f64 = 1e-6;

/// Divergence/entropy-gap comparison between a joint P̄ and the maximum-entropy
/// member Q* of its order-M marginal polytope.
///
/// `kl_maxent_true` is KL(Q*‖P̄) and `kl_true_maxent` is KL(P̄‖Q*). Because
/// E_P[−ln Q*] = H(Q*) for every P in the polytope, the entropy gap
/// H(Q*) − H(P̄) always equals KL(P̄‖Q*); the opposite direction agrees only to
/// second order in the distance between the two.
#[derive(Debug, Clone, Serialize)]
pub struct GapIdentityReport {
    pub k: usize,
    pub order: usize,
    pub cards: Vec<usize>,
    pub entropy_maxent: f64,
    pub entropy_true: f64,
    pub kl_maxent_true: f64,
    pub kl_true_maxent: f64,
    /// |KL(Q*‖P̄) − (H(Q*) − H(P̄))|
    pub residual: f64,
    /// |KL(P̄‖Q*) − (H(Q*) − H(P̄))|
    pub residual_reverse: f64,
    pub ipf_sweeps: usize,
    pub ipf_marginal_tv: f64,
    pub tv_to_true: f64,
    pub identity_holds: bool,
    pub reverse_identity_holds: bool,
    /// When Q* differs from P̄, the divergence and the entropy gap are both strictly positive.
    pub strict_gap_holds: bool,
}

impl GapIdentityReport {
    pub fn passed(&self) -> bool {
        self.identity_holds && self.strict_gap_holds
    }
}

/// Fits Q* to the order-`m` marginals of a strictly positive `pbar` and compares
/// KL(Q*‖P̄) with H(Q*) − H(P̄) at tolerance `tol`.
pub fn verify_gap_identity(
    pbar: &DenseJoint,
    m: usize,
    tol: f64,
) -> Result<GapIdentityReport, MaxentError> {
    if let Some(cell) = pbar.probs.iter().position(|&p| p <= 0.0) {
        return Err(MaxentError::NotStrictlyPositive { cell });
    }
    let set = all_marginals(pbar, m)?;
    let fit = ipf_maxent(&set, DEFAULT_IPF_TOL, DEFAULT_MAX_SWEEPS)?;
    let q = &fit.joint;
    let h_q = entropy(q);
    let h_p = entropy(pbar);
    let gap = h_q - h_p;
    let forward = kl(q, pbar);
    let reverse = kl(pbar, q);
    let residual = (forward - gap).abs();
    let residual_reverse = (reverse - gap).abs();
    let tv_to_true = q.tv(pbar);
    let strict_gap_holds = tv_to_true <= EQUALITY_TV || (forward > 0.0 && h_q > h_p);
    Ok(GapIdentityReport {
        k: pbar.num_columns(),
        order: m,
        cards: pbar.cards.clone(),
        entropy_maxent: h_q,
        entropy_true: h_p,
        kl_maxent_true: forward,
        kl_true_maxent: reverse,
        residual,
        residual_reverse,
        ipf_sweeps: fit.sweeps,
        ipf_marginal_tv: fit.residual,
        tv_to_true,
        identity_holds: residual <= tol,
        reverse_identity_holds: residual_reverse <= tol,
        strict_gap_holds,
    })
}

/// A joint with independent Exp(1) cell weights, normalized; every cell is positive.
pub fn random_positive_joint<R: Rng + ?Sized>(
    cards: &[usize],
    rng: &mut R,
) -> Result<DenseJoint, MaxentError> {
    let cells = cell_count(cards)?;
    let weights: Vec<f64> = (0..cells)
        .map(|_| loop {
            let w: f64 = rng.sample(Exp1);
            if w > 0.0 {
                break w;
            }
        })
        .collect();
    DenseJoint::from_weights(cards.to_vec(), weights)
}
