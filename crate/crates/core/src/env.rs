//! Episode lifecycle around the network simulator: observation assembly,
//! action decoding and clamping, constraint-penalised reward.
//!
//! One step covers one slot `n`:
//!
//! 1. the action's amplitude, phase and power increments are applied and the
//!    resulting configuration serves this slot's tasks over the channel drawn
//!    at `q(n)`;
//! 2. the displacement moves the UAV to `q(n+1)` (flight energy of slot `n`);
//! 3. tasks and channels for slot `n+1` are drawn.
//!
//! Observation layout (length given by [`observation_dim`]):
//!
//! | block            | length      | scaling                                   |
//! |------------------|-------------|-------------------------------------------|
//! | `h_MB`, `h_kM`   | `2M(K+1)`   | re/im (or magnitude/phase) over `sqrt(rho(H))` |
//! | or cascaded      | `2MK`       | re/im of `conj(h_MB) h_kM e^{j phi}` over `sqrt(rho_MB rho_kM)` |
//! | `beta_r`         | `M`         | `2 beta - 1`                              |
//! | phases           | `4M`        | cos/sin of `phi_r`, then of `phi_t`        |
//! | `q(n)`           | `2`         | `2 x / side - 1`                          |
//! | tasks            | `3K`        | `I / I_max`, `G / 1000`, `T_max / T_hi`    |
//! | power            | `K`         | `1 + ln(p/p_max) / ln(p_max/p_min)`        |
//! | cascaded SNR     | `K`         | optional, `10 log10(|h_k|^2 p_max / sigma^2) / 50` |
//! | slot fraction    | `1`         | `n / N`                                   |

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{
    cascaded_gain_vectors, make_star_matrices, rate, sample_rician, sinr, ChannelParams, ChannelRealization,
    LinkGeometry, Region, StarCoefficients,
};
use crate::compute::{
    local_energy, local_latency, offload_energy, offload_latency, slot_completion_time, DeviceCompute,
    EnergyBreakdown, TaskSpec,
};
use crate::config::{ActionUpdateMode, ChannelFeatures, RewardConfig, RisMode, SystemConfig};
use crate::error::{Result, SimError};
use crate::mobility::{apply_displacement, flight_energy, FlightPlanState, Position3};
use crate::trace::{EpisodeHeader, EpisodeTrace, SlotRecord, Violations};

/// Flat, normalised state vector handed to a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// One slot's decision in physical units.
///
/// `lambda` is absolute. All other fields are increments whose meaning
/// depends on [`ActionUpdateMode`]: in additive mode `displacement` is in
/// meters, `delta_beta_r` in amplitude units and phases in radians; in
/// Hadamard mode they are natural-log factors. `delta_power` is a log factor
/// in both modes. Zero increments always hold the current configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlAction {
    pub lambda: Vec<f64>,
    pub displacement: [f64; 2],
    /// Empty in conventional-RIS mode.
    pub delta_beta_r: Vec<f64>,
    pub delta_phi_r: Vec<f64>,
    pub delta_phi_t: Vec<f64>,
    pub delta_power: Vec<f64>,
}

impl ControlAction {
    /// Holds every configured quantity and offloads `lambda` of each task.
    pub fn hold(cfg: &SystemConfig, lambda: f64) -> Self {
        let m = cfg.elements;
        let k = cfg.num_devices;
        Self {
            lambda: vec![lambda; k],
            displacement: [0.0; 2],
            delta_beta_r: match cfg.ris_mode {
                RisMode::Star => vec![0.0; m],
                RisMode::Conventional => Vec::new(),
            },
            delta_phi_r: vec![0.0; m],
            delta_phi_t: vec![0.0; m],
            delta_power: vec![0.0; k],
        }
    }

    fn is_finite(&self) -> bool {
        self.lambda
            .iter()
            .chain(&self.displacement)
            .chain(&self.delta_beta_r)
            .chain(&self.delta_phi_r)
            .chain(&self.delta_phi_t)
            .chain(&self.delta_power)
            .all(|v| v.is_finite())
    }
}

/// Maps squashed policy outputs in `[-1, 1]` onto [`ControlAction`]s.
///
/// Layout: `lambda (K) | displacement (2) | delta_beta_r (M, STAR only) |
/// delta_phi_r (M) | delta_phi_t (M) | delta_power (K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpace {
    pub devices: usize,
    pub elements: usize,
    pub has_amplitude: bool,
    pub mode: ActionUpdateMode,
    pub max_step_m: f64,
    pub beta_step: f64,
    pub power_log_step: f64,
    pub hadamard_log_step: f64,
}

impl ActionSpace {
    pub fn from_config(cfg: &SystemConfig) -> Self {
        Self {
            devices: cfg.num_devices,
            elements: cfg.elements,
            has_amplitude: cfg.ris_mode == RisMode::Star,
            mode: cfg.action_update,
            max_step_m: cfg.max_speed_mps * cfg.slot_duration(),
            beta_step: cfg.beta_step,
            power_log_step: cfg.power_log_step,
            hadamard_log_step: cfg.hadamard_log_step,
        }
    }

    pub fn dim(&self) -> usize {
        let amp = if self.has_amplitude { self.elements } else { 0 };
        2 * self.devices + 2 + amp + 2 * self.elements
    }

    pub fn decode(&self, squashed: &[f64]) -> Result<ControlAction> {
        if squashed.len() != self.dim() {
            return Err(SimError::DimensionMismatch {
                what: "action",
                expected: self.dim(),
                got: squashed.len(),
            });
        }
        if squashed.iter().any(|v| !v.is_finite()) {
            return Err(SimError::InvalidAction("non-finite policy output".into()));
        }
        let k = self.devices;
        let m = self.elements;
        let mut it = squashed.iter().map(|v| v.clamp(-1.0, 1.0));
        let mut take = |n: usize, scale: f64| -> Vec<f64> { it.by_ref().take(n).map(|a| a * scale).collect() };

        let lambda = take(k, 0.5).into_iter().map(|v| v + 0.5).collect();
        let (pos_scale, beta_scale, phase_scale) = match self.mode {
            ActionUpdateMode::Additive => (self.max_step_m, self.beta_step, PI),
            ActionUpdateMode::Hadamard => (self.hadamard_log_step, self.hadamard_log_step, self.hadamard_log_step),
        };
        let d = take(2, pos_scale);
        let delta_beta_r = if self.has_amplitude { take(m, beta_scale) } else { Vec::new() };
        let delta_phi_r = take(m, phase_scale);
        let delta_phi_t = take(m, phase_scale);
        let delta_power = take(k, self.power_log_step);
        Ok(ControlAction {
            lambda,
            displacement: [d[0], d[1]],
            delta_beta_r,
            delta_phi_r,
            delta_phi_t,
            delta_power,
        })
    }
}

pub fn observation_dim(cfg: &SystemConfig) -> usize {
    let m = cfg.elements;
    let k = cfg.num_devices;
    let gain = if cfg.gain_features { k } else { 0 };
    let channel = match cfg.features {
        ChannelFeatures::Cascaded => 2 * m * k,
        _ => 2 * m * (k + 1),
    };
    channel + m + 4 * m + 2 + 3 * k + k + gain + 1
}

/// Everything that changes within an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub flight: FlightPlanState,
    pub tasks: Vec<TaskSpec>,
    pub channel: ChannelRealization,
    pub coeffs: StarCoefficients,
    pub power_w: Vec<f64>,
    /// 1-based slot index.
    pub slot: usize,
    pub done: bool,
}

impl NetworkState {
    pub fn position(&self) -> Position3 {
        self.flight.current
    }
}

/// `G0` for `x >= 0`, else `x`.
pub fn piecewise_c(x: f64, g0: f64) -> f64 {
    if x >= 0.0 {
        g0
    } else {
        x
    }
}

/// Inputs of the per-slot reward.
#[derive(Debug, Clone)]
pub struct RewardTerms<'a> {
    pub energy: &'a EnergyBreakdown,
    pub deadlines: &'a [f64],
    pub completion: &'a [f64],
    /// `lambda_k I_k G_k` per device, in cycles.
    pub capacity_usage: &'a [f64],
    pub mec_capacity: f64,
    pub displacement: f64,
    pub max_step: f64,
}

/// `mu1 E/scale + sum mu2 C(T_k - t_k) + sum mu3 C((F/K - lambda_k I_k G_k)/F) + mu4 C(V I - ||dq||)`.
///
/// Every `C` argument is floored at `-penalty_floor` and `E/scale` is capped
/// at `energy_cap` when one is set.
pub fn reward(terms: &RewardTerms<'_>, cfg: &RewardConfig, energy_scale: f64) -> f64 {
    let floor = -cfg.penalty_floor;
    let c = |x: f64| piecewise_c(x.max(floor), cfg.g0);
    let k = terms.deadlines.len().max(1) as f64;
    let share = terms.mec_capacity / k;
    let deadline: f64 = terms
        .deadlines
        .iter()
        .zip(terms.completion)
        .map(|(t, done)| cfg.mu2 * c(t - done))
        .sum();
    let capacity: f64 = terms
        .capacity_usage
        .iter()
        .map(|u| cfg.mu3 * c((share - u) / terms.mec_capacity))
        .sum();
    let speed = cfg.mu4 * c(terms.max_step - terms.displacement);
    let mut e = terms.energy.total / energy_scale;
    if let Some(cap) = cfg.energy_cap {
        e = e.min(cap);
    }
    cfg.mu1 * e + deadline + capacity + speed
}

#[derive(Debug, Clone)]
pub struct StepInfo {
    pub energy: EnergyBreakdown,
    pub violations: Violations,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

fn mix_seed(a: u64, b: u64) -> u64 {
    // splitmix64 finaliser over the combined words
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform placement: reflection devices left of the start's x coordinate,
/// transmission devices right of it.
pub fn place_devices(cfg: &SystemConfig) -> (Vec<Position3>, Vec<Region>) {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0x504c_4143_45));
    let split = cfg.start_xy[0].clamp(0.0, cfg.area_side_m);
    let mut devices = Vec::with_capacity(cfg.num_devices);
    let mut regions = Vec::with_capacity(cfg.num_devices);
    for k in 0..cfg.num_devices {
        let region = if k < cfg.reflection_devices {
            Region::Reflection
        } else {
            Region::Transmission
        };
        let (lo, hi) = match region {
            Region::Reflection => (0.0, split),
            Region::Transmission => (split, cfg.area_side_m),
        };
        let x = lo + (hi - lo) * rng.random::<f64>();
        let y = cfg.area_side_m * rng.random::<f64>();
        devices.push(Position3::new(x, y, 0.0));
        regions.push(region);
    }
    (devices, regions)
}

/// Cloning snapshots the full state, random streams included.
#[derive(Debug, Clone)]
pub struct StarMecEnv {
    cfg: SystemConfig,
    devices: Vec<Position3>,
    regions: Vec<Region>,
    compute: DeviceCompute,
    channel_params: ChannelParams,
    noise_power: f64,
    energy_scale: f64,
    action_space: ActionSpace,
    /// Task draws; kept apart from fading so that task sequences do not
    /// depend on the element count.
    task_rng: ChaCha8Rng,
    fading_rng: ChaCha8Rng,
    state: NetworkState,
    trace: EpisodeTrace,
}

impl StarMecEnv {
    /// Builds the environment and resets it with episode seed 0.
    pub fn new(cfg: SystemConfig) -> Result<Self> {
        cfg.validate()?;
        let (devices, regions) = place_devices(&cfg);
        let channel_params = cfg.channel_params();
        let flight = Self::initial_flight(&cfg);
        let state = NetworkState {
            flight,
            tasks: Vec::new(),
            channel: ChannelRealization {
                h_mb: Vec::new(),
                h_km: Vec::new(),
                rician_k: cfg.rician_factor,
                path_gain_mb: 0.0,
                path_gain_km: Vec::new(),
            },
            coeffs: StarCoefficients::uniform(cfg.elements, 0.5),
            power_w: vec![cfg.initial_power_w; cfg.num_devices],
            slot: 1,
            done: false,
        };
        let trace = EpisodeTrace::new(EpisodeHeader {
            label: String::new(),
            episode_seed: 0,
            slots_total: cfg.slots,
            start: cfg.start(),
            devices: devices.clone(),
            regions: regions.clone(),
        });
        let mut env = Self {
            compute: cfg.device_compute(),
            noise_power: cfg.noise_power(),
            energy_scale: cfg.energy_scale(),
            action_space: ActionSpace::from_config(&cfg),
            channel_params,
            devices,
            regions,
            task_rng: ChaCha8Rng::seed_from_u64(0),
            fading_rng: ChaCha8Rng::seed_from_u64(0),
            state,
            trace,
            cfg,
        };
        env.reset(0);
        Ok(env)
    }

    fn initial_flight(cfg: &SystemConfig) -> FlightPlanState {
        let mut f = FlightPlanState::new(
            cfg.start(),
            cfg.slot_duration(),
            cfg.max_speed_mps,
            cfg.flight_coeff,
            cfg.slots,
            cfg.area(),
        );
        f.enforce_return = cfg.enforce_return;
        f.clamp_speed = cfg.clamp_speed;
        f
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn devices(&self) -> &[Position3] {
        &self.devices
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    pub fn trace(&self) -> &EpisodeTrace {
        &self.trace
    }

    pub fn take_trace(&mut self) -> EpisodeTrace {
        let header = self.trace.header();
        std::mem::replace(&mut self.trace, EpisodeTrace::new(header))
    }

    pub fn action_space(&self) -> &ActionSpace {
        &self.action_space
    }

    pub fn observation_dim(&self) -> usize {
        observation_dim(&self.cfg)
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn energy_scale(&self) -> f64 {
        self.energy_scale
    }

    /// Region whose elements are active in conventional mode at `slot`.
    pub fn served_region(&self, slot: usize) -> Option<Region> {
        match self.cfg.ris_mode {
            RisMode::Star => None,
            RisMode::Conventional => Some(if slot % 2 == 1 {
                Region::Reflection
            } else {
                Region::Transmission
            }),
        }
    }

    pub fn set_label(&mut self, label: impl Into<String>) {
        self.trace.label = label.into();
    }

    /// Starts a new episode. Device placement stays fixed; tasks and channel
    /// draws follow `seed`.
    pub fn reset(&mut self, seed: u64) -> Observation {
        self.task_rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x5441_534b));
        self.fading_rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x4641_4445));
        let label = std::mem::take(&mut self.trace.label);
        self.trace = EpisodeTrace::new(EpisodeHeader {
            label,
            episode_seed: seed,
            slots_total: self.cfg.slots,
            start: self.cfg.start(),
            devices: self.devices.clone(),
            regions: self.regions.clone(),
        });
        self.state.flight = Self::initial_flight(&self.cfg);
        self.state.coeffs = StarCoefficients::uniform(self.cfg.elements, 0.5);
        self.state.power_w = vec![self.cfg.initial_power_w; self.cfg.num_devices];
        self.state.slot = 1;
        self.state.done = false;
        self.force_conventional_amplitudes();
        self.draw_slot();
        self.observe()
    }

    fn force_conventional_amplitudes(&mut self) {
        if let Some(region) = self.served_region(self.state.slot) {
            let b = if region == Region::Reflection { 1.0 } else { 0.0 };
            for m in 0..self.cfg.elements {
                self.state.coeffs.set_beta_r(m, b);
            }
        }
    }

    fn draw_slot(&mut self) {
        let cfg = &self.cfg;
        self.state.tasks = (0..cfg.num_devices)
            .map(|_| {
                let [lo, hi] = cfg.input_bits_range;
                let bits = match cfg.fixed_input_bits {
                    Some(b) => b,
                    None => lo + (hi - lo) * self.task_rng.random::<f64>(),
                };
                let [dlo, dhi] = cfg.deadline_range_s;
                let deadline = dlo + (dhi - dlo) * self.task_rng.random::<f64>();
                TaskSpec {
                    input_bits: bits,
                    cycles_per_bit: cfg.cycles_per_bit,
                    deadline,
                }
            })
            .collect();
        let geometry = LinkGeometry {
            ris: self.state.flight.current,
            bs: cfg.bs(),
            devices: self.devices.clone(),
        };
        self.state.channel = sample_rician(&geometry, &self.channel_params, &mut self.fading_rng);
    }

    /// `|h_k|^2` for every device under the given coefficients.
    pub fn channel_gains(&self, coeffs: &StarCoefficients) -> Result<Vec<f64>> {
        let mats = make_star_matrices(coeffs)?;
        let ch = &self.state.channel;
        self.regions
            .iter()
            .enumerate()
            .map(|(k, &r)| cascaded_gain_vectors(&ch.h_mb, mats.for_region(r), &ch.h_km[k]).map(|h| h.norm_sqr()))
            .collect()
    }

    pub fn observe(&self) -> Observation {
        let cfg = &self.cfg;
        let st = &self.state;
        let mut v = Vec::with_capacity(self.observation_dim());
        let scale = 1.0 / self.channel_params.path_gain(cfg.altitude_m).sqrt();
        let push_vec = |v: &mut Vec<f64>, h: &[num_complex::Complex64]| match cfg.features {
            ChannelFeatures::RealImag => {
                for c in h {
                    v.push(c.re * scale);
                    v.push(c.im * scale);
                }
            }
            ChannelFeatures::MagPhase => {
                for c in h {
                    v.push(c.norm() * scale);
                    v.push(c.arg() / PI);
                }
            }
            ChannelFeatures::Cascaded => unreachable!("handled separately"),
        };
        if cfg.features == ChannelFeatures::Cascaded {
            let ch = &st.channel;
            for (k, h_km) in ch.h_km.iter().enumerate() {
                let phis = match self.regions[k] {
                    Region::Reflection => &st.coeffs.phi_r,
                    Region::Transmission => &st.coeffs.phi_t,
                };
                let norm = 1.0 / (ch.path_gain_mb * ch.path_gain_km[k]).sqrt();
                for m in 0..cfg.elements {
                    let c = ch.h_mb[m].conj() * h_km[m] * num_complex::Complex64::from_polar(norm, phis[m]);
                    v.push(c.re);
                    v.push(c.im);
                }
            }
        } else {
            push_vec(&mut v, &st.channel.h_mb);
            for h in &st.channel.h_km {
                push_vec(&mut v, h);
            }
        }
        v.extend(st.coeffs.beta_r.iter().map(|b| 2.0 * b - 1.0));
        for phis in [&st.coeffs.phi_r, &st.coeffs.phi_t] {
            v.extend(phis.iter().map(|p| p.cos()));
            v.extend(phis.iter().map(|p| p.sin()));
        }
        let q = st.flight.current;
        v.push(2.0 * q.x / cfg.area_side_m - 1.0);
        v.push(2.0 * q.y / cfg.area_side_m - 1.0);
        for t in &st.tasks {
            v.push(t.input_bits / cfg.input_bits_range[1]);
            v.push(t.cycles_per_bit / 1000.0);
            v.push(t.deadline / cfg.deadline_range_s[1]);
        }
        let span = (cfg.max_power_w / cfg.min_power_w).ln();
        v.extend(st.power_w.iter().map(|p| 1.0 + (p / cfg.max_power_w).ln() / span));
        if cfg.gain_features {
            let gains = self.channel_gains(&st.coeffs).unwrap_or_else(|_| vec![0.0; cfg.num_devices]);
            v.extend(gains.iter().map(|g| {
                let snr = g * cfg.max_power_w / self.noise_power;
                (10.0 * (snr + 1e-30).log10() / 50.0).clamp(-2.0, 2.0)
            }));
        }
        v.push(st.slot as f64 / cfg.slots as f64);
        Observation(v)
    }

    /// Decodes squashed policy outputs and steps.
    pub fn step_squashed(&mut self, squashed: &[f64]) -> Result<StepOutcome> {
        let action = self.action_space.decode(squashed)?;
        self.step(&action)
    }

    pub fn step(&mut self, action: &ControlAction) -> Result<StepOutcome> {
        if self.state.done {
            return Err(SimError::EpisodeFinished);
        }
        self.check_dims(action)?;
        if !action.is_finite() {
            return Err(SimError::InvalidAction("non-finite entry".into()));
        }
        let cfg = self.cfg.clone();
        let k_dev = cfg.num_devices;
        let slot_duration = cfg.slot_duration();
        let slot = self.state.slot;

        // Configuration for this slot.
        let lambda: Vec<f64> = action.lambda.iter().map(|l| l.clamp(0.0, 1.0)).collect();
        self.apply_surface_increments(action);
        for (p, d) in self.state.power_w.iter_mut().zip(&action.delta_power) {
            let factor = d.exp();
            *p = (*p * factor).clamp(cfg.min_power_w, cfg.max_power_w);
        }

        // Communication and computation over the channel at q(n).
        let gains = self.channel_gains(&self.state.coeffs)?;
        let rates: Vec<f64> = (0..k_dev)
            .map(|k| {
                let s = sinr(k, &gains, &self.state.power_w, &self.regions, self.noise_power, cfg.interference);
                rate(s, cfg.bandwidth_hz)
            })
            .collect();
        let mut violations = Violations::default();
        let mut lambda_exec = lambda.clone();
        let mut completion = vec![0.0; k_dev];
        let mut usage = vec![0.0; k_dev];
        let (mut e_local, mut e_off) = (0.0, 0.0);
        for k in 0..k_dev {
            let task = &self.state.tasks[k];
            let p = self.state.power_w[k];
            // The link is only valid for this slot; an upload that cannot
            // finish inside it falls back to local execution.
            if lambda[k] > 0.0 && !(offload_latency(lambda[k], task, rates[k]) <= slot_duration) {
                violations.link_fallback += 1;
                lambda_exec[k] = 0.0;
            }
            let l = lambda_exec[k];
            let t_loc = local_latency(l, task, &self.compute);
            let t_off = offload_latency(l, task, rates[k]);
            completion[k] = slot_completion_time(l, t_loc, t_off, cfg.completion);
            if completion[k] > task.deadline {
                violations.deadline += 1;
            }
            usage[k] = l * task.cycles();
            e_local += local_energy(l, task, &self.compute);
            e_off += offload_energy(l, task, rates[k], p);
        }
        let capacity_usage: f64 = usage.iter().sum();
        violations.capacity = capacity_usage > cfg.mec_capacity_cycles;

        // Motion to q(n+1).
        let before = self.state.flight.current;
        let delta = match cfg.action_update {
            ActionUpdateMode::Additive => action.displacement,
            ActionUpdateMode::Hadamard => [
                before.x * (action.displacement[0].exp() - 1.0),
                before.y * (action.displacement[1].exp() - 1.0),
            ],
        };
        self.state.flight = apply_displacement(&self.state.flight, delta)?;
        let after = self.state.flight.current;
        let displacement = before.distance(&after);
        let max_step = self.state.flight.max_step();
        violations.speed = displacement > max_step + 1e-9;
        let e_flight = flight_energy(&before, &after, cfg.slot_duration(), cfg.flight_coeff, cfg.flight_exponent);
        let energy = EnergyBreakdown::new(e_local, e_off, e_flight);

        let deadlines: Vec<f64> = self.state.tasks.iter().map(|t| t.deadline).collect();
        let mut r = reward(
            &RewardTerms {
                energy: &energy,
                deadlines: &deadlines,
                completion: &completion,
                capacity_usage: &usage,
                mec_capacity: cfg.mec_capacity_cycles,
                displacement,
                max_step,
            },
            &cfg.reward,
            self.energy_scale,
        );
        let done = slot >= cfg.slots;
        if done {
            r -= cfg.reward.return_penalty_weight * after.horizontal_distance(&cfg.start());
        }

        self.trace.slots.push(SlotRecord {
            slot,
            position: before,
            next_position: after,
            displacement_m: displacement,
            lambda,
            lambda_executed: lambda_exec,
            power_w: self.state.power_w.clone(),
            beta_r: self.state.coeffs.beta_r.clone(),
            phi_r: self.state.coeffs.phi_r.clone(),
            phi_t: self.state.coeffs.phi_t.clone(),
            served_region: self.served_region(slot),
            input_bits: self.state.tasks.iter().map(|t| t.input_bits).collect(),
            deadline_s: deadlines,
            rate_bps: rates,
            completion_s: completion,
            capacity_usage_cycles: capacity_usage,
            reward: r,
            energy,
            violations,
        });

        if done {
            self.state.done = true;
        } else {
            self.state.slot += 1;
            self.force_conventional_amplitudes();
            self.draw_slot();
        }
        Ok(StepOutcome {
            observation: self.observe(),
            reward: r,
            done,
            info: StepInfo { energy, violations },
        })
    }

    fn check_dims(&self, a: &ControlAction) -> Result<()> {
        let k = self.cfg.num_devices;
        let m = self.cfg.elements;
        let amp = if self.action_space.has_amplitude { m } else { 0 };
        for (what, expected, got) in [
            ("lambda", k, a.lambda.len()),
            ("delta_beta_r", amp, a.delta_beta_r.len()),
            ("delta_phi_r", m, a.delta_phi_r.len()),
            ("delta_phi_t", m, a.delta_phi_t.len()),
            ("delta_power", k, a.delta_power.len()),
        ] {
            if expected != got {
                return Err(SimError::DimensionMismatch { what, expected, got });
            }
        }
        Ok(())
    }

    fn apply_surface_increments(&mut self, action: &ControlAction) {
        let mode = self.cfg.action_update;
        let served = self.served_region(self.state.slot);
        let coeffs = &mut self.state.coeffs;
        match served {
            None => {
                for (m, d) in action.delta_beta_r.iter().enumerate() {
                    let b = match mode {
                        ActionUpdateMode::Additive => coeffs.beta_r[m] + d,
                        ActionUpdateMode::Hadamard => coeffs.beta_r[m] * d.exp(),
                    };
                    coeffs.set_beta_r(m, b);
                }
            }
            Some(region) => {
                let b = if region == Region::Reflection { 1.0 } else { 0.0 };
                for m in 0..coeffs.elements() {
                    coeffs.set_beta_r(m, b);
                }
            }
        }
        for (region, deltas) in [(Region::Reflection, &action.delta_phi_r), (Region::Transmission, &action.delta_phi_t)] {
            for (m, d) in deltas.iter().enumerate() {
                let cur = match region {
                    Region::Reflection => coeffs.phi_r[m],
                    Region::Transmission => coeffs.phi_t[m],
                };
                let next = match mode {
                    ActionUpdateMode::Additive => cur + d,
                    ActionUpdateMode::Hadamard => cur * d.exp(),
                };
                coeffs.set_phase(region, m, next);
            }
        }
    }
}
