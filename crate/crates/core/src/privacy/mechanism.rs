use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::PrivacyError;
use crate::autodiff::Real;

/// Euclidean norm accumulated in f64.
pub fn l2_norm<T: Real>(g: &[T]) -> f64 {
    g.iter()
        .map(|x| {
            let x = x.as_f64();
            x * x
        })
        .sum::<f64>()
        .sqrt()
}

/// Scales `g` by `min(1, c/‖g‖)` in place and returns the norm before
/// clipping. An infinite `c` leaves `g` untouched.
pub fn clip_in_place<T: Real>(g: &mut [T], c: f64) -> f64 {
    let norm = l2_norm(g);
    if norm > c {
        let s = T::from_f64(c / norm);
        for x in g.iter_mut() {
            *x *= s;
        }
    }
    norm
}

pub fn clip_gradient<T: Real>(g: &[T], c: f64) -> Vec<T> {
    let mut out = g.to_vec();
    clip_in_place(&mut out, c);
    out
}

/// `sum ← (sum + z) / denom` with a single draw `z ~ N(0, c²σ² I)`.
/// With `sigma == 0` no random numbers are consumed.
pub fn add_noise_and_scale<T: Real, R: Rng + ?Sized>(
    sum: &mut [T],
    c: f64,
    sigma: f64,
    denom: f64,
    rng: &mut R,
) {
    let std = c * sigma;
    let inv = 1.0 / denom;
    for x in sum.iter_mut() {
        let noise = if std > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            std * z
        } else {
            0.0
        };
        *x = T::from_f64((x.as_f64() + noise) * inv);
    }
}

/// Sum of already-clipped gradients plus one Gaussian draw, divided by the
/// batch size.
pub fn noisy_aggregate<T: Real, R: Rng + ?Sized>(
    clipped: &[Vec<T>],
    c: f64,
    sigma: f64,
    rng: &mut R,
) -> Result<Vec<T>, PrivacyError> {
    let first = clipped.first().ok_or(PrivacyError::EmptyBatch)?;
    let mut sum = vec![T::zero(); first.len()];
    for g in clipped {
        if g.len() != sum.len() {
            return Err(PrivacyError::LengthMismatch {
                expected: sum.len(),
                got: g.len(),
            });
        }
        for (s, &x) in sum.iter_mut().zip(g) {
            *s += x;
        }
    }
    add_noise_and_scale(&mut sum, c, sigma, clipped.len() as f64, rng);
    Ok(sum)
}

/// Indices `0..n`, each kept independently with probability `q`.
pub fn poisson_sample<R: Rng + ?Sized>(n: usize, q: f64, rng: &mut R) -> Vec<usize> {
    if q >= 1.0 {
        return (0..n).collect();
    }
    (0..n).filter(|_| rng.random::<f64>() < q).collect()
}
