//! Experiment configuration, read from TOML.
//!
//! Every section is optional; missing keys take the defaults below. The
//! physical scenario lives under `[system]` with the same field names as
//! [`SystemConfig`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use starmec_agent::{Activation, PpoConfig, TrainConfig};
use starmec_core::{RewardConfig, SystemConfig};

use crate::error::{HarnessError, Result};
use crate::schemes::Scheme;

pub const CONFIG_VERSION: u32 = 1;

/// Overrides the configured output directory when set.
pub const OUTPUT_DIR_ENV: &str = "STARMEC_OUTPUT_DIR";

/// Chip coefficient used by the experiments. At 100 MHz device clocks it
/// gives 1e-10 J per cycle.
pub const EXPERIMENT_CHIP_COEFF: f64 = 1e-26;

/// Reward energy cap used by the experiments, in units of the worst-case
/// all-local slot energy. High enough that a slot spent uploading over a
/// poor link is still felt in full.
pub const EXPERIMENT_ENERGY_CAP: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub output_dir: PathBuf,
    pub system: SystemConfig,
    pub training: TrainingSettings,
    pub sweep: SweepSettings,
    pub oracle: OracleSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            output_dir: PathBuf::from("results"),
            system: SystemConfig {
                chip_coeff: EXPERIMENT_CHIP_COEFF,
                reward: RewardConfig {
                    energy_cap: Some(EXPERIMENT_ENERGY_CAP),
                    ..RewardConfig::default()
                },
                ..SystemConfig::default()
            },
            training: TrainingSettings::default(),
            sweep: SweepSettings::default(),
            oracle: OracleSettings::default(),
        }
    }
}

/// PPO and rollout settings shared by every learned scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSettings {
    pub iterations: usize,
    pub episodes_per_iteration: usize,
    pub parallel_envs: usize,
    pub clip_eps: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub hidden: Vec<usize>,
    pub activation: String,
    pub init_log_std: f64,
    pub normalize_advantages: bool,
}

impl Default for TrainingSettings {
    fn default() -> Self {
        let ppo = PpoConfig::default();
        Self {
            iterations: 300,
            episodes_per_iteration: 16,
            parallel_envs: 8,
            clip_eps: ppo.clip_eps,
            gamma: ppo.gamma,
            gae_lambda: ppo.gae_lambda,
            epochs: ppo.epochs,
            minibatch: 128,
            actor_lr: 1e-4,
            critic_lr: 3e-4,
            entropy_coef: 0.0,
            max_grad_norm: ppo.max_grad_norm,
            hidden: ppo.hidden,
            activation: ppo.activation.name().to_string(),
            init_log_std: -1.0,
            normalize_advantages: ppo.normalize_advantages,
        }
    }
}

impl TrainingSettings {
    pub fn ppo(&self) -> Result<PpoConfig> {
        let activation = Activation::parse(&self.activation)
            .ok_or_else(|| HarnessError::Config(vec![format!("training.activation: unknown `{}`", self.activation)]))?;
        let cfg = PpoConfig {
            clip_eps: self.clip_eps,
            gamma: self.gamma,
            gae_lambda: self.gae_lambda,
            epochs: self.epochs,
            minibatch: self.minibatch,
            actor_lr: self.actor_lr,
            critic_lr: self.critic_lr,
            entropy_coef: self.entropy_coef,
            max_grad_norm: self.max_grad_norm,
            hidden: self.hidden.clone(),
            activation,
            init_log_std: self.init_log_std,
            normalize_advantages: self.normalize_advantages,
        };
        cfg.validate().map_err(|e| HarnessError::Config(vec![format!("training: {e}")]))?;
        Ok(cfg)
    }

    pub fn train_config(&self, seed: u64) -> Result<TrainConfig> {
        Ok(TrainConfig {
            ppo: self.ppo()?,
            iterations: self.iterations,
            episodes_per_iteration: self.episodes_per_iteration,
            parallel_envs: self.parallel_envs,
            seed,
            episode_seed: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    pub seeds: Vec<u64>,
    /// Task sizes in Mbit.
    pub input_bits_mbit: Vec<f64>,
    pub elements: Vec<usize>,
    /// Evaluation episodes behind every result row.
    pub eval_episodes: usize,
    pub schemes: Vec<Scheme>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            seeds: (0..5).collect(),
            input_bits_mbit: linspace(0.05, 0.1, 6),
            elements: vec![10, 20, 30, 40],
            eval_episodes: 30,
            schemes: Scheme::BENCHMARKS.to_vec(),
        }
    }
}

/// Grid for the brute-force search on the single-slot, single-device instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSettings {
    pub elements: usize,
    pub instance_seed: u64,
    pub lambda_levels: usize,
    /// Log-spaced transmit powers between `min_power_w` and `max_power_w`.
    pub power_levels: usize,
    pub min_power_w: f64,
    pub beta_levels: usize,
    /// Uniform phase levels per element.
    pub phase_levels: usize,
    /// Displacement steps in meters along each axis, including zero.
    pub displacements_m: Vec<f64>,
    /// Training budget for the PPO comparison on the same instance.
    pub ppo_iterations: usize,
    pub ppo_episodes_per_iteration: usize,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            elements: 4,
            instance_seed: 7,
            lambda_levels: 21,
            power_levels: 12,
            min_power_w: 1e-4,
            beta_levels: 3,
            phase_levels: 8,
            displacements_m: vec![-5.0, 0.0, 5.0],
            ppo_iterations: 300,
            ppo_episodes_per_iteration: 32,
        }
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Parses `lo:hi:n` as an inclusive linear grid or `a,b,c` as a list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || HarnessError::Argument(format!("grid `{spec}`: expected lo:hi:n or a comma list"));
    let parts: Vec<&str> = spec.split(':').collect();
    let grid = match parts.as_slice() {
        [lo, hi, n] => {
            let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
            let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
            let n: usize = n.trim().parse().map_err(|_| bad())?;
            linspace(lo, hi, n)
        }
        [list] => list
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?,
        _ => return Err(bad()),
    };
    if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
        return Err(bad());
    }
    Ok(grid)
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            HarnessError::ConfigParse { message, .. } => HarnessError::ConfigParse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::ConfigParse {
            path: PathBuf::from("<inline>"),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config always serialises")
    }

    /// Collects every offending field.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.version != CONFIG_VERSION {
            bad.push(format!("version: expected {CONFIG_VERSION}, got {}", self.version));
        }
        if let Err(starmec_core::SimError::InvalidConfig(v)) = self.system.validate() {
            bad.extend(v.into_iter().map(|m| format!("system.{m}")));
        }
        if let Err(HarnessError::Config(v)) = self.training.ppo() {
            bad.extend(v);
        }
        let t = &self.training;
        if t.iterations == 0 {
            bad.push("training.iterations must be at least 1".into());
        }
        if t.episodes_per_iteration == 0 || t.parallel_envs == 0 {
            bad.push("training.episodes_per_iteration and training.parallel_envs must be positive".into());
        }
        let s = &self.sweep;
        if s.seeds.is_empty() {
            bad.push("sweep.seeds must not be empty".into());
        }
        if s.input_bits_mbit.is_empty() {
            bad.push("sweep.input_bits_mbit must not be empty".into());
        }
        if s.input_bits_mbit.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            bad.push("sweep.input_bits_mbit entries must be positive".into());
        }
        if s.elements.is_empty() {
            bad.push("sweep.elements must not be empty".into());
        }
        if s.elements.contains(&0) {
            bad.push("sweep.elements entries must be at least 1".into());
        }
        if s.eval_episodes == 0 {
            bad.push("sweep.eval_episodes must be at least 1".into());
        }
        if s.schemes.is_empty() {
            bad.push("sweep.schemes must not be empty".into());
        }
        let o = &self.oracle;
        if o.elements == 0 {
            bad.push("oracle.elements must be at least 1".into());
        }
        for (name, v) in [
            ("lambda_levels", o.lambda_levels),
            ("power_levels", o.power_levels),
            ("beta_levels", o.beta_levels),
            ("phase_levels", o.phase_levels),
        ] {
            if v == 0 {
                bad.push(format!("oracle.{name} must be at least 1"));
            }
        }
        if !(o.min_power_w > 0.0 && o.min_power_w <= self.system.max_power_w) {
            bad.push("oracle.min_power_w must lie in (0, system.max_power_w]".into());
        }
        if o.displacements_m.is_empty() {
            bad.push("oracle.displacements_m must not be empty".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Config(bad))
        }
    }

    /// Command-line flag, then [`OUTPUT_DIR_ENV`], then the config value.
    pub fn resolve_output_dir(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.output_dir.clone(),
        }
    }
}
