//! STAR-RIS coefficients, Rician fading, cascaded gains, SINR and rate.
//!
//! Each RIS-side link vector is
//!
//! ```text
//! h = sqrt(rho(d)) * ( sqrt(K/(1+K)) * h_los + sqrt(1/(1+K)) * h_nlos )
//! ```
//!
//! with `rho(d) = rho0 * d^-alpha`, `h_nlos ~ CN(0, I)` and a uniform linear
//! array line-of-sight profile `h_los[m] = exp(-j 2 pi (d + m * spacing * cos(theta)) / wavelength)`,
//! where `theta` is the angle between the link and the array axis (x axis).
//! The BS side is a single effective antenna, so every cascaded gain
//! `h_k = h_MB^H * Theta * h_kM` is a complex scalar.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::mobility::Position3;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Which side of the surface a device sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Reflection,
    Transmission,
}

/// Per-element amplitude split and phases of the surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarCoefficients {
    pub beta_r: Vec<f64>,
    pub beta_t: Vec<f64>,
    pub phi_r: Vec<f64>,
    pub phi_t: Vec<f64>,
}

impl StarCoefficients {
    /// Uniform split `beta_r = beta`, all phases zero.
    pub fn uniform(elements: usize, beta_r: f64) -> Self {
        Self {
            beta_r: vec![beta_r; elements],
            beta_t: vec![1.0 - beta_r; elements],
            phi_r: vec![0.0; elements],
            phi_t: vec![0.0; elements],
        }
    }

    pub fn elements(&self) -> usize {
        self.beta_r.len()
    }

    /// Sets the reflection amplitude of element `m` and its complement.
    pub fn set_beta_r(&mut self, m: usize, beta_r: f64) {
        let b = beta_r.clamp(0.0, 1.0);
        self.beta_r[m] = b;
        self.beta_t[m] = 1.0 - b;
    }

    pub fn set_phase(&mut self, region: Region, m: usize, phi: f64) {
        let w = wrap_phase(phi);
        match region {
            Region::Reflection => self.phi_r[m] = w,
            Region::Transmission => self.phi_t[m] = w,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.elements();
        for (what, len) in [
            ("beta_t", self.beta_t.len()),
            ("phi_r", self.phi_r.len()),
            ("phi_t", self.phi_t.len()),
        ] {
            if len != m {
                return Err(SimError::DimensionMismatch { what, expected: m, got: len });
            }
        }
        for (i, (&r, &t)) in self.beta_r.iter().zip(&self.beta_t).enumerate() {
            for v in [r, t] {
                if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                    return Err(SimError::AmplitudeOutOfRange { element: i, value: v });
                }
            }
        }
        Ok(())
    }
}

/// Wraps an angle into `[0, 2 pi)`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Diagonals of the reflection and transmission coefficient matrices,
/// `sqrt(beta_m) * exp(j phi_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StarMatrices {
    pub reflection: Vec<Complex64>,
    pub transmission: Vec<Complex64>,
}

impl StarMatrices {
    pub fn for_region(&self, region: Region) -> &[Complex64] {
        match region {
            Region::Reflection => &self.reflection,
            Region::Transmission => &self.transmission,
        }
    }
}

pub fn make_star_matrices(coeffs: &StarCoefficients) -> Result<StarMatrices> {
    coeffs.validate()?;
    let diag = |beta: &[f64], phi: &[f64]| -> Vec<Complex64> {
        beta.iter()
            .zip(phi)
            .map(|(&b, &p)| Complex64::from_polar(b.sqrt(), p))
            .collect()
    };
    Ok(StarMatrices {
        reflection: diag(&coeffs.beta_r, &coeffs.phi_r),
        transmission: diag(&coeffs.beta_t, &coeffs.phi_t),
    })
}

/// Large-scale and array parameters shared by all RIS-side links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub elements: usize,
    /// Rician factor (linear).
    pub rician_k: f64,
    /// Path-loss reference gain at 1 m, in dB.
    pub ref_gain_db: f64,
    pub pathloss_exponent: f64,
    pub carrier_hz: f64,
    /// Element spacing as a fraction of the carrier wavelength.
    pub spacing_wavelengths: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            elements: 20,
            rician_k: 10.0,
            ref_gain_db: -30.0,
            pathloss_exponent: 2.2,
            carrier_hz: 2.4e9,
            spacing_wavelengths: 0.5,
        }
    }
}

impl ChannelParams {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// `rho(d) = rho0 * d^-alpha` (linear power gain).
    pub fn path_gain(&self, distance: f64) -> f64 {
        db_to_linear(self.ref_gain_db) * distance.max(1.0).powf(-self.pathloss_exponent)
    }

    /// Unit-modulus ULA steering vector from the surface towards `other`.
    pub fn los_vector(&self, ris: &Position3, other: &Position3) -> Vec<Complex64> {
        let d = ris.distance(other);
        let cos_theta = if d > 0.0 { (other.x - ris.x) / d } else { 0.0 };
        let lambda = self.wavelength();
        let base = (d / lambda).fract();
        (0..self.elements)
            .map(|m| {
                let cycles = base + m as f64 * self.spacing_wavelengths * cos_theta;
                Complex64::from_polar(1.0, -TAU * cycles)
            })
            .collect()
    }
}

/// Positions needed to evaluate every RIS-side link in one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    pub ris: Position3,
    pub bs: Position3,
    pub devices: Vec<Position3>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    /// Surface to BS, length M.
    pub h_mb: Vec<Complex64>,
    /// Device k to surface, K vectors of length M.
    pub h_km: Vec<Vec<Complex64>>,
    pub rician_k: f64,
    pub path_gain_mb: f64,
    pub path_gain_km: Vec<f64>,
}

impl ChannelRealization {
    pub fn is_finite(&self) -> bool {
        self.h_mb.iter().all(|c| c.is_finite()) && self.h_km.iter().flatten().all(|c| c.is_finite())
    }
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn rician_vector<R: Rng + ?Sized>(rng: &mut R, los: &[Complex64], path_gain: f64, k: f64) -> Vec<Complex64> {
    let (w_los, w_nlos) = rician_weights(k);
    let amp = path_gain.sqrt();
    los.iter()
        .map(|&l| {
            let n = complex_normal(rng);
            (l * w_los + n * w_nlos) * amp
        })
        .collect()
}

/// `(sqrt(K/(1+K)), sqrt(1/(1+K)))`, with the K = inf limit handled.
pub fn rician_weights(k: f64) -> (f64, f64) {
    if k.is_infinite() {
        (1.0, 0.0)
    } else {
        ((k / (1.0 + k)).sqrt(), (1.0 / (1.0 + k)).sqrt())
    }
}

/// Draws one slot's channel vectors. The generator is advanced in a fixed
/// order (BS link first, then devices in index order).
pub fn sample_rician<R: Rng + ?Sized>(geometry: &LinkGeometry, params: &ChannelParams, rng: &mut R) -> ChannelRealization {
    let k = params.rician_k;
    let path_gain_mb = params.path_gain(geometry.ris.distance(&geometry.bs));
    let los_mb = params.los_vector(&geometry.ris, &geometry.bs);
    let h_mb = rician_vector(rng, &los_mb, path_gain_mb, k);
    let mut h_km = Vec::with_capacity(geometry.devices.len());
    let mut path_gain_km = Vec::with_capacity(geometry.devices.len());
    for dev in &geometry.devices {
        let g = params.path_gain(geometry.ris.distance(dev));
        let los = params.los_vector(&geometry.ris, dev);
        h_km.push(rician_vector(rng, &los, g, k));
        path_gain_km.push(g);
    }
    ChannelRealization {
        h_mb,
        h_km,
        rician_k: k,
        path_gain_mb,
        path_gain_km,
    }
}

pub fn sample_rician_seeded(geometry: &LinkGeometry, params: &ChannelParams, seed: u64) -> ChannelRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_rician(geometry, params, &mut rng)
}

/// `h_MB^H * diag(theta) * h_kM` for device `k`.
pub fn cascaded_gain(realization: &ChannelRealization, theta: &[Complex64], device: usize) -> Result<Complex64> {
    let h_km = realization.h_km.get(device).ok_or(SimError::DimensionMismatch {
        what: "device index",
        expected: realization.h_km.len(),
        got: device,
    })?;
    cascaded_gain_vectors(&realization.h_mb, theta, h_km)
}

pub fn cascaded_gain_vectors(h_mb: &[Complex64], theta: &[Complex64], h_km: &[Complex64]) -> Result<Complex64> {
    let m = h_mb.len();
    for (what, len) in [("theta", theta.len()), ("h_kM", h_km.len())] {
        if len != m {
            return Err(SimError::DimensionMismatch { what, expected: m, got: len });
        }
    }
    Ok(h_mb
        .iter()
        .zip(theta)
        .zip(h_km)
        .map(|((b, t), k)| b.conj() * t * k)
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceMode {
    /// Each device on its own sub-carrier.
    #[default]
    Orthogonal,
    /// Indexed-sum interference from later devices of the same region.
    Sinr,
}

/// SINR of `device`. In `Sinr` mode the interference sums `p_j |h_j|^2`
/// over devices of the same region with a larger index.
pub fn sinr(device: usize, gains: &[f64], powers: &[f64], regions: &[Region], noise_power: f64, mode: InterferenceMode) -> f64 {
    let signal = powers[device] * gains[device];
    let interference = match mode {
        InterferenceMode::Orthogonal => 0.0,
        InterferenceMode::Sinr => (device + 1..gains.len())
            .filter(|&j| regions[j] == regions[device])
            .map(|j| powers[j] * gains[j])
            .sum(),
    };
    signal / (interference + noise_power)
}

/// Shannon rate `W log2(1 + sinr)` in bits/s.
pub fn rate(sinr: f64, bandwidth_hz: f64) -> f64 {
    bandwidth_hz * sinr.ln_1p() / std::f64::consts::LN_2
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Integrated noise power in watts from a density in dBm/Hz.
pub fn noise_power_watts(density_dbm_per_hz: f64, bandwidth_hz: f64) -> f64 {
    10f64.powf((density_dbm_per_hz + 10.0 * bandwidth_hz.log10() - 30.0) / 10.0)
}

/// Phase that rotates `z` onto the positive real axis.
pub fn aligning_phase(z: Complex64) -> f64 {
    wrap_phase(-z.arg())
}
