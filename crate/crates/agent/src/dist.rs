//! Diagonal Gaussian squashed by `tanh`.
//!
//! Samples are drawn as `u ~ N(mean, exp(log_std)^2)` and executed as
//! `a = tanh(u)`. The raw `u` is what the buffer stores, so the Jacobian
//! correction cancels inside probability ratios but is kept in
//! [`squashed_log_prob`] so that it is a true density on `(-1, 1)^d`.

use rand::Rng;
use rand_distr::StandardNormal;

pub const LN_2PI: f64 = 1.837_877_066_409_345_3;

pub fn gaussian_log_prob(u: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    u.iter()
        .zip(mean)
        .zip(log_std)
        .map(|((&x, &m), &ls)| {
            let z = (x - m) * (-ls).exp();
            -0.5 * z * z - ls - 0.5 * LN_2PI
        })
        .sum()
}

/// `sum log(1 - tanh(u)^2)`, evaluated as `2 (ln 2 - u - softplus(-2u))`.
pub fn tanh_log_jacobian(u: &[f64]) -> f64 {
    u.iter()
        .map(|&x| 2.0 * (std::f64::consts::LN_2 - x - softplus(-2.0 * x)))
        .sum()
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Log-density of `a = tanh(u)`.
pub fn squashed_log_prob(u: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    gaussian_log_prob(u, mean, log_std) - tanh_log_jacobian(u)
}

/// Entropy of the pre-squash Gaussian, used for the exploration bonus.
pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| 0.5 + 0.5 * LN_2PI + ls).sum()
}

pub fn sample<R: Rng + ?Sized>(mean: &[f64], log_std: &[f64], rng: &mut R) -> Vec<f64> {
    mean.iter()
        .zip(log_std)
        .map(|(&m, &ls)| m + ls.exp() * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

pub fn squash(u: &[f64]) -> Vec<f64> {
    u.iter().map(|x| x.tanh()).collect()
}
