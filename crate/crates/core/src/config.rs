use serde::{Deserialize, Serialize};

use crate::channel::{noise_power_watts, ChannelParams, InterferenceMode};
use crate::compute::{CompletionMode, DeviceCompute};
use crate::error::{Result, SimError};
use crate::mobility::{Position3, ServiceArea};

/// How action increments combine with the current configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionUpdateMode {
    /// Position, amplitude and phase increments are added; power is scaled
    /// by a log-domain increment.
    #[default]
    Additive,
    /// Element-wise product with positive factors for every quantity.
    Hadamard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RisMode {
    /// Every element splits energy between reflection and transmission.
    #[default]
    Star,
    /// Reflect-only or transmit-only per slot; the amplitude action is removed.
    Conventional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelFeatures {
    #[default]
    RealImag,
    MagPhase,
    /// Per device and element, `conj(h_MB[m]) h_kM[m] exp(j phi[m])` with the
    /// device's own region phase, normalised by the link path gains. Equal
    /// phases across `m` mean the surface is aligned to that device.
    Cascaded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// Weight on the slot energy; negative so that reward falls with energy.
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub mu4: f64,
    /// Revenue returned by `C(x)` for satisfied constraints.
    pub g0: f64,
    /// Terminal penalty per meter between the final and first position.
    pub return_penalty_weight: f64,
    /// Joules mapped to one reward unit. `None` uses the worst-case
    /// all-local slot energy.
    pub energy_scale: Option<f64>,
    /// Lower bound applied to every `C(x)` argument.
    pub penalty_floor: f64,
    /// Upper bound on the normalised slot energy `E / energy_scale` inside
    /// the reward. `None` leaves the energy term unbounded.
    pub energy_cap: Option<f64>,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            mu1: -1.0,
            mu2: 1.0,
            mu3: 1.0,
            mu4: 1.0,
            g0: 0.1,
            return_penalty_weight: 1.0,
            energy_scale: None,
            penalty_floor: 10.0,
            energy_cap: Some(10.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// Seeds device placement.
    pub seed: u64,
    pub num_devices: usize,
    /// Devices `0..reflection_devices` sit in the reflection region.
    pub reflection_devices: usize,
    pub elements: usize,

    pub area_side_m: f64,
    pub altitude_m: f64,
    pub start_xy: [f64; 2],
    pub bs_position: [f64; 3],
    pub flight_time_s: f64,
    pub slots: usize,
    pub max_speed_mps: f64,
    /// `kappa` in `kappa * speed^exponent`.
    pub flight_coeff: f64,
    pub flight_exponent: u32,

    pub rician_factor: f64,
    pub ref_gain_db: f64,
    pub pathloss_exponent: f64,
    pub carrier_hz: f64,
    pub element_spacing_wavelengths: f64,
    pub noise_dbm_per_hz: f64,
    pub bandwidth_hz: f64,
    pub interference: InterferenceMode,

    pub cycles_per_bit: f64,
    pub cpu_freq_hz: f64,
    pub chip_coeff: f64,
    pub max_power_w: f64,
    /// Floor keeping the multiplicative power update away from zero.
    pub min_power_w: f64,
    pub initial_power_w: f64,
    /// MEC capacity in CPU cycles per slot.
    pub mec_capacity_cycles: f64,
    pub input_bits_range: [f64; 2],
    /// When set, every task carries exactly this many input bits.
    pub fixed_input_bits: Option<f64>,
    pub deadline_range_s: [f64; 2],
    pub completion: CompletionMode,

    pub action_update: ActionUpdateMode,
    pub ris_mode: RisMode,
    pub features: ChannelFeatures,
    /// Append per-device cascaded SNR (dB scale) to the observation.
    pub gain_features: bool,
    pub enforce_return: bool,
    pub clamp_speed: bool,
    /// Largest amplitude change per slot.
    pub beta_step: f64,
    /// Largest per-slot change of ln(power).
    pub power_log_step: f64,
    /// Largest per-slot ln-factor for position, amplitude and phase in
    /// Hadamard mode.
    pub hadamard_log_step: f64,

    pub reward: RewardConfig,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            num_devices: 6,
            reflection_devices: 3,
            elements: 20,
            area_side_m: 100.0,
            altitude_m: 20.0,
            start_xy: [50.0, 0.0],
            bs_position: [50.0, 0.0, 0.0],
            flight_time_s: 50.0,
            slots: 20,
            max_speed_mps: 7.0,
            flight_coeff: 1e-4,
            flight_exponent: 1,
            rician_factor: 10.0,
            ref_gain_db: -30.0,
            pathloss_exponent: 2.2,
            carrier_hz: 2.4e9,
            element_spacing_wavelengths: 0.5,
            noise_dbm_per_hz: -174.0,
            bandwidth_hz: 10e6,
            interference: InterferenceMode::Orthogonal,
            cycles_per_bit: 800.0,
            cpu_freq_hz: 100e6,
            chip_coeff: 1e-28,
            max_power_w: 0.2,
            min_power_w: 1e-6,
            initial_power_w: 0.1,
            mec_capacity_cycles: 10e9,
            input_bits_range: [0.05e6, 0.1e6],
            fixed_input_bits: None,
            deadline_range_s: [1.0, 5.0],
            completion: CompletionMode::Weighted,
            action_update: ActionUpdateMode::Additive,
            ris_mode: RisMode::Star,
            features: ChannelFeatures::RealImag,
            gain_features: true,
            enforce_return: true,
            clamp_speed: true,
            beta_step: 0.5,
            power_log_step: 1000f64.ln(),
            hadamard_log_step: 2f64.ln(),
            reward: RewardConfig::default(),
        }
    }
}

impl SystemConfig {
    /// Collects every offending field instead of stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let mut positive = |name: &str, v: f64| {
            if !(v > 0.0 && v.is_finite()) {
                bad.push(format!("{name} must be positive and finite (got {v})"));
            }
        };
        positive("area_side_m", self.area_side_m);
        positive("altitude_m", self.altitude_m);
        positive("flight_time_s", self.flight_time_s);
        positive("max_speed_mps", self.max_speed_mps);
        positive("flight_coeff", self.flight_coeff);
        positive("carrier_hz", self.carrier_hz);
        positive("element_spacing_wavelengths", self.element_spacing_wavelengths);
        positive("bandwidth_hz", self.bandwidth_hz);
        positive("cycles_per_bit", self.cycles_per_bit);
        positive("cpu_freq_hz", self.cpu_freq_hz);
        positive("chip_coeff", self.chip_coeff);
        positive("max_power_w", self.max_power_w);
        positive("min_power_w", self.min_power_w);
        positive("mec_capacity_cycles", self.mec_capacity_cycles);
        positive("beta_step", self.beta_step);
        positive("power_log_step", self.power_log_step);
        positive("hadamard_log_step", self.hadamard_log_step);
        positive("reward.g0", self.reward.g0);
        positive("reward.mu2", self.reward.mu2);
        positive("reward.mu3", self.reward.mu3);
        positive("reward.mu4", self.reward.mu4);
        positive("reward.penalty_floor", self.reward.penalty_floor);
        if let Some(c) = self.reward.energy_cap {
            positive("reward.energy_cap", c);
        }
        if let Some(s) = self.reward.energy_scale {
            positive("reward.energy_scale", s);
        }
        if let Some(b) = self.fixed_input_bits {
            positive("fixed_input_bits", b);
        }
        positive("input_bits_range[0]", self.input_bits_range[0]);
        positive("deadline_range_s[0]", self.deadline_range_s[0]);

        if !(self.rician_factor >= 0.0) {
            bad.push(format!("rician_factor must be >= 0 (got {})", self.rician_factor));
        }
        if !(self.reward.mu1 < 0.0) {
            bad.push(format!("reward.mu1 must be negative (got {})", self.reward.mu1));
        }
        if !(self.reward.return_penalty_weight >= 0.0) {
            bad.push("reward.return_penalty_weight must be >= 0".into());
        }
        if self.num_devices == 0 {
            bad.push("num_devices must be at least 1".into());
        }
        if self.reflection_devices > self.num_devices {
            bad.push(format!(
                "reflection_devices ({}) exceeds num_devices ({})",
                self.reflection_devices, self.num_devices
            ));
        }
        if self.elements == 0 {
            bad.push("elements must be at least 1".into());
        }
        if self.slots == 0 {
            bad.push("slots must be at least 1".into());
        }
        if !(1..=2).contains(&self.flight_exponent) {
            bad.push(format!("flight_exponent must be 1 or 2 (got {})", self.flight_exponent));
        }
        if self.input_bits_range[1] < self.input_bits_range[0] {
            bad.push("input_bits_range is reversed".into());
        }
        if self.deadline_range_s[1] < self.deadline_range_s[0] {
            bad.push("deadline_range_s is reversed".into());
        }
        if !(self.min_power_w <= self.initial_power_w && self.initial_power_w <= self.max_power_w) {
            bad.push("initial_power_w must lie in [min_power_w, max_power_w]".into());
        }
        let area = self.area();
        let start = self.start();
        if !area.contains(&start) {
            bad.push(format!("start_xy {:?} lies outside the service area", self.start_xy));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(SimError::InvalidConfig(bad))
        }
    }

    pub fn slot_duration(&self) -> f64 {
        self.flight_time_s / self.slots as f64
    }

    pub fn area(&self) -> ServiceArea {
        ServiceArea::square(self.area_side_m)
    }

    pub fn start(&self) -> Position3 {
        Position3::new(self.start_xy[0], self.start_xy[1], self.altitude_m)
    }

    pub fn bs(&self) -> Position3 {
        Position3::new(self.bs_position[0], self.bs_position[1], self.bs_position[2])
    }

    pub fn noise_power(&self) -> f64 {
        noise_power_watts(self.noise_dbm_per_hz, self.bandwidth_hz)
    }

    pub fn channel_params(&self) -> ChannelParams {
        ChannelParams {
            elements: self.elements,
            rician_k: self.rician_factor,
            ref_gain_db: self.ref_gain_db,
            pathloss_exponent: self.pathloss_exponent,
            carrier_hz: self.carrier_hz,
            spacing_wavelengths: self.element_spacing_wavelengths,
        }
    }

    pub fn device_compute(&self) -> DeviceCompute {
        DeviceCompute {
            cpu_freq_hz: self.cpu_freq_hz,
            chip_coeff: self.chip_coeff,
            max_power_w: self.max_power_w,
        }
    }

    /// Slot energy with every device computing its largest task locally.
    pub fn worst_case_local_slot_energy(&self) -> f64 {
        let bits = self.fixed_input_bits.unwrap_or(self.input_bits_range[1]);
        self.num_devices as f64
            * self.chip_coeff
            * self.cpu_freq_hz
            * self.cpu_freq_hz
            * bits
            * self.cycles_per_bit
    }

    pub fn energy_scale(&self) -> f64 {
        self.reward
            .energy_scale
            .unwrap_or_else(|| self.worst_case_local_slot_energy())
    }
}
