use serde::{Deserialize, Serialize};

use super::PrivacyError;

/// Integer Rényi orders tracked by the accountant.
pub const RDP_ORDERS: std::ops::RangeInclusive<u32> = 2..=64;

pub const SIGMA_SEARCH_MIN: f64 = 1e-2;
pub const SIGMA_SEARCH_MAX: f64 = 1e6;

const SIGMA_REL_TOL: f64 = 1e-4;

fn check_q_sigma(q: f64, sigma: f64) -> Result<(), PrivacyError> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(PrivacyError::InvalidParameter(format!("sampling rate {q} not in (0, 1]")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(PrivacyError::InvalidParameter(format!("sigma {sigma} must be positive")));
    }
    Ok(())
}

fn log_binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64 / (i + 1) as f64).ln()).sum()
}

/// Per-step RDP of the Poisson-subsampled Gaussian mechanism at integer
/// order `alpha`:
///
/// `ε(α) = log( Σ_k C(α,k) (1−q)^(α−k) q^k exp(k(k−1)/(2σ²)) ) / (α−1)`,
/// summed in log space.
pub fn rdp_subsampled_gaussian(q: f64, sigma: f64, alpha: u32) -> Result<f64, PrivacyError> {
    check_q_sigma(q, sigma)?;
    if alpha < 2 {
        return Err(PrivacyError::InvalidParameter(format!("order {alpha} below 2")));
    }
    let ln_q = q.ln();
    let ln_1mq = (-q).ln_1p();
    let inv_two_var = 1.0 / (2.0 * sigma * sigma);
    let terms: Vec<f64> = (0..=alpha)
        .filter_map(|k| {
            let rest = alpha - k;
            if rest > 0 && q >= 1.0 {
                return None;
            }
            let mut t = log_binomial(alpha, k) + (k as f64) * (k as f64 - 1.0) * inv_two_var;
            if k > 0 {
                t += k as f64 * ln_q;
            }
            if rest > 0 {
                t += rest as f64 * ln_1mq;
            }
            Some(t)
        })
        .collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln();
    Ok((lse / (alpha - 1) as f64).max(0.0))
}

/// Per-step RDP curve for a fixed `(q, σ)` over [`RDP_ORDERS`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccountantState {
    pub sigma: f64,
    pub q: f64,
    pub orders: Vec<u32>,
    pub rdp_per_step: Vec<f64>,
}

impl AccountantState {
    pub fn new(q: f64, sigma: f64) -> Result<Self, PrivacyError> {
        let orders: Vec<u32> = RDP_ORDERS.collect();
        let rdp_per_step = orders
            .iter()
            .map(|&a| rdp_subsampled_gaussian(q, sigma, a))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            sigma,
            q,
            orders,
            rdp_per_step,
        })
    }

    /// Accumulated RDP after `steps` compositions.
    pub fn rdp(&self, steps: u64) -> Vec<f64> {
        self.rdp_per_step.iter().map(|r| steps as f64 * r).collect()
    }

    pub fn epsilon(&self, steps: u64, delta: f64) -> f64 {
        epsilon_from_rdp(self, steps, delta)
    }
}

/// `ε = min_α T·ε(α) + log(1/δ)/(α−1)`, and exactly zero when `T = 0`.
pub fn epsilon_from_rdp(acc: &AccountantState, steps: u64, delta: f64) -> f64 {
    if steps == 0 {
        return 0.0;
    }
    let log_inv_delta = -delta.ln();
    acc.orders
        .iter()
        .zip(&acc.rdp_per_step)
        .map(|(&a, &r)| steps as f64 * r + log_inv_delta / (a - 1) as f64)
        .fold(f64::INFINITY, f64::min)
}

fn epsilon_at(sigma: f64, q: f64, steps: u64, delta: f64) -> Result<f64, PrivacyError> {
    Ok(AccountantState::new(q, sigma)?.epsilon(steps, delta))
}

/// Smallest σ on a log-scale bisection (relative tolerance 1e-4) whose
/// `T`-step guarantee is within `target`. Returns the lower search bound when
/// even that is private enough.
pub fn calibrate_sigma(target: f64, delta: f64, q: f64, steps: u64) -> Result<f64, PrivacyError> {
    if !(target > 0.0) {
        return Err(PrivacyError::InvalidParameter(format!("epsilon {target} must be positive")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(PrivacyError::InvalidParameter(format!("delta {delta} not in (0, 1)")));
    }
    check_q_sigma(q, 1.0)?;
    let mut lo = SIGMA_SEARCH_MIN;
    let mut hi = SIGMA_SEARCH_MAX;
    if epsilon_at(lo, q, steps, delta)? <= target {
        return Ok(lo);
    }
    if epsilon_at(hi, q, steps, delta)? > target {
        return Err(PrivacyError::Infeasible {
            target,
            sigma_max: SIGMA_SEARCH_MAX,
        });
    }
    while hi / lo - 1.0 > SIGMA_REL_TOL {
        let mid = (lo * hi).sqrt();
        if epsilon_at(mid, q, steps, delta)? <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
