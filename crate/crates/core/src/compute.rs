//! Task model, local/offload latency and energy, and system energy totals.

use serde::{Deserialize, Serialize};

use crate::trace::EpisodeTrace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub input_bits: f64,
    pub cycles_per_bit: f64,
    /// Maximum tolerable completion latency in seconds.
    pub deadline: f64,
}

impl TaskSpec {
    pub fn cycles(&self) -> f64 {
        self.input_bits * self.cycles_per_bit
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceCompute {
    pub cpu_freq_hz: f64,
    /// Effective switched capacitance of the processor.
    pub chip_coeff: f64,
    pub max_power_w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub local: f64,
    pub offload: f64,
    pub flight: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn new(local: f64, offload: f64, flight: f64) -> Self {
        Self {
            local,
            offload,
            flight,
            total: local + offload + flight,
        }
    }

    pub fn device(&self) -> f64 {
        self.local + self.offload
    }
}

impl std::ops::Add for EnergyBreakdown {
    type Output = EnergyBreakdown;
    fn add(self, rhs: Self) -> Self {
        EnergyBreakdown::new(self.local + rhs.local, self.offload + rhs.offload, self.flight + rhs.flight)
    }
}

impl std::iter::Sum for EnergyBreakdown {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(EnergyBreakdown::default(), |a, b| a + b)
    }
}

/// `(1 - lambda) I G / f`.
pub fn local_latency(lambda: f64, task: &TaskSpec, dev: &DeviceCompute) -> f64 {
    (1.0 - lambda) * task.cycles() / dev.cpu_freq_hz
}

/// `rho f^2 (1 - lambda) I G`.
pub fn local_energy(lambda: f64, task: &TaskSpec, dev: &DeviceCompute) -> f64 {
    dev.chip_coeff * dev.cpu_freq_hz * dev.cpu_freq_hz * (1.0 - lambda) * task.cycles()
}

/// `lambda I / r`; infinite when there is something to send at zero rate.
pub fn offload_latency(lambda: f64, task: &TaskSpec, rate_bps: f64) -> f64 {
    let bits = lambda * task.input_bits;
    if bits == 0.0 {
        0.0
    } else if rate_bps > 0.0 {
        bits / rate_bps
    } else {
        f64::INFINITY
    }
}

/// `p lambda I / r`.
pub fn offload_energy(lambda: f64, task: &TaskSpec, rate_bps: f64, power_w: f64) -> f64 {
    if power_w == 0.0 || lambda == 0.0 {
        return 0.0;
    }
    power_w * offload_latency(lambda, task, rate_bps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompletionMode {
    /// `(1 - lambda) t_loc + lambda t_off`, taken verbatim from the latency
    /// constraint (both latencies already carry their own lambda factor).
    #[default]
    Weighted,
    /// `max(t_loc, t_off)`: both parts run concurrently.
    Parallel,
}

pub fn slot_completion_time(lambda: f64, local_latency: f64, offload_latency: f64, mode: CompletionMode) -> f64 {
    match mode {
        CompletionMode::Weighted => {
            let off = if lambda == 0.0 { 0.0 } else { lambda * offload_latency };
            (1.0 - lambda) * local_latency + off
        }
        CompletionMode::Parallel => local_latency.max(offload_latency),
    }
}

/// Energy summed over every recorded slot of a trace.
pub fn total_energy(trace: &EpisodeTrace) -> EnergyBreakdown {
    trace.slots.iter().map(|s| s.energy).sum()
}
