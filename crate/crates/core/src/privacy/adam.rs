use serde::{Deserialize, Serialize};

use super::PrivacyError;
use crate::autodiff::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for every parameter coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            t: 0,
        }
    }
}

/// One bias-corrected Adam step: `θ ← θ − lr · m̂ / (√v̂ + eps)`.
///
/// A coordinate whose moments are both zero does not move, even with
/// `eps == 0`.
pub fn adam_step<T: Real>(
    state: &mut AdamState<T>,
    params: &mut [T],
    grad: &[T],
    config: &AdamConfig,
) -> Result<(), PrivacyError> {
    if grad.len() != params.len() || state.m.len() != params.len() {
        return Err(PrivacyError::LengthMismatch {
            expected: params.len(),
            got: grad.len(),
        });
    }
    state.t += 1;
    let t = state.t as i32;
    let b1 = T::from_f64(config.beta1);
    let b2 = T::from_f64(config.beta2);
    let one = T::one();
    let c1 = T::from_f64(1.0 / (1.0 - config.beta1.powi(t)));
    let c2 = T::from_f64(1.0 / (1.0 - config.beta2.powi(t)));
    let lr = T::from_f64(config.lr);
    let eps = T::from_f64(config.eps);
    for i in 0..params.len() {
        let g = grad[i];
        let m = b1 * state.m[i] + (one - b1) * g;
        let v = b2 * state.v[i] + (one - b2) * g * g;
        state.m[i] = m;
        state.v[i] = v;
        let m_hat = m * c1;
        let denom = (v * c2).sqrt() + eps;
        if denom > T::zero() {
            params[i] -= lr * m_hat / denom;
        }
    }
    Ok(())
}
