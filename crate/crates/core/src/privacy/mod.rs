//! DP-SGD mechanics: per-example clipping, Gaussian noise, Poisson
//! subsampling, the Adam update and Rényi accounting.

mod accountant;
mod adam;
mod mechanism;

use thiserror::Error;

pub use accountant::{
    calibrate_sigma, epsilon_from_rdp, rdp_subsampled_gaussian, AccountantState, RDP_ORDERS,
    SIGMA_SEARCH_MAX, SIGMA_SEARCH_MIN,
};
pub use adam::{adam_step, AdamConfig, AdamState};
pub use mechanism::{
    add_noise_and_scale, clip_gradient, clip_in_place, l2_norm, noisy_aggregate, poisson_sample,
};

#[derive(Debug, Error, PartialEq)]
pub enum PrivacyError {
    #[error("invalid privacy parameter: {0}")]
    InvalidParameter(String),
    #[error("target epsilon {target} is unreachable even at sigma = {sigma_max}")]
    Infeasible { target: f64, sigma_max: f64 },
    #[error("cannot aggregate an empty batch")]
    EmptyBatch,
    #[error("gradient length {got} does not match parameter count {expected}")]
    LengthMismatch { expected: usize, got: usize },
}
