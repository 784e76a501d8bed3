//! Exhaustive grid search on a single-slot, single-device instance.
//!
//! Every grid point is played through a copy of the environment, so the
//! energy and feasibility checks are exactly those the agent faces.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use starmec_agent::{train, PpoController, TrainConfig};
use starmec_core::baselines::run_episode;
use starmec_core::compute::total_energy;
use starmec_core::{ActionUpdateMode, ControlAction, EpisodeTrace, RisMode, StarMecEnv, SystemConfig};

use crate::config::{linspace, ExperimentConfig, OracleSettings};
use crate::error::{HarnessError, Result};

/// Largest number of grid points a search may visit.
pub const MAX_GRID_POINTS: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleGrid {
    pub lambda: Vec<f64>,
    pub power_w: Vec<f64>,
    pub beta_r: Vec<f64>,
    pub phase_levels: usize,
    pub displacements: Vec<[f64; 2]>,
}

impl OracleGrid {
    pub fn from_settings(s: &OracleSettings, max_power_w: f64) -> Self {
        let power_w = if s.power_levels == 1 {
            vec![max_power_w]
        } else {
            let (lo, hi) = (s.min_power_w.ln(), max_power_w.ln());
            linspace(lo, hi, s.power_levels).into_iter().map(f64::exp).collect()
        };
        let mut displacements = Vec::new();
        for &dx in &s.displacements_m {
            for &dy in &s.displacements_m {
                displacements.push([dx, dy]);
            }
        }
        Self {
            lambda: linspace(0.0, 1.0, s.lambda_levels),
            power_w,
            beta_r: linspace(0.0, 1.0, s.beta_levels),
            phase_levels: s.phase_levels,
            displacements,
        }
    }

    /// Phase vectors visited for `elements` elements. The first element is
    /// pinned at zero: a common rotation of every phase leaves all gains
    /// unchanged, so this loses nothing.
    pub fn phase_combinations(&self, elements: usize) -> u128 {
        (self.phase_levels as u128).pow(elements.saturating_sub(1) as u32)
    }

    pub fn size(&self, elements: usize) -> u128 {
        self.lambda.len() as u128
            * self.power_w.len() as u128
            * self.beta_r.len() as u128
            * self.displacements.len() as u128
            * self.phase_combinations(elements)
    }

    fn phases(&self, elements: usize, mut index: u128) -> Vec<f64> {
        let l = self.phase_levels as u128;
        let mut out = vec![0.0; elements];
        for slot in out.iter_mut().skip(1) {
            *slot = TAU * (index % l) as f64 / l as f64;
            index /= l;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OraclePoint {
    pub lambda: f64,
    pub power_w: f64,
    pub beta_r: f64,
    pub phases: Vec<f64>,
    pub displacement: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub min_energy_j: f64,
    pub argmin: OraclePoint,
    pub evaluated: usize,
    pub feasible: usize,
}

/// The single-slot, single-device variant of `base` with `elements` elements.
pub fn oracle_instance(base: &SystemConfig, elements: usize) -> SystemConfig {
    SystemConfig {
        slots: 1,
        num_devices: 1,
        reflection_devices: 1,
        elements,
        ..base.clone()
    }
}

fn action_for(env: &StarMecEnv, p: &OraclePoint) -> ControlAction {
    let st = env.state();
    let mut a = ControlAction::hold(env.config(), p.lambda);
    a.displacement = p.displacement;
    for (d, cur) in a.delta_beta_r.iter_mut().zip(&st.coeffs.beta_r) {
        *d = p.beta_r - cur;
    }
    for (m, phi) in p.phases.iter().enumerate() {
        a.delta_phi_r[m] = phi - st.coeffs.phi_r[m];
        a.delta_phi_t[m] = phi - st.coeffs.phi_t[m];
    }
    a.delta_power[0] = (p.power_w / st.power_w[0]).ln();
    a
}

/// Energy of one grid point, or `None` when it misses a deadline or the
/// server capacity.
pub fn evaluate_point(env: &StarMecEnv, point: &OraclePoint) -> Result<Option<f64>> {
    let mut probe = env.clone();
    let out = probe.step(&action_for(env, point))?;
    let v = out.info.violations;
    Ok((v.deadline == 0 && !v.capacity).then_some(out.info.energy.total))
}

/// Exhaustive search over `grid` on episode `seed` of `system`.
pub fn oracle_search(system: &SystemConfig, seed: u64, grid: &OracleGrid) -> Result<OracleResult> {
    if system.slots != 1 || system.num_devices != 1 {
        return Err(HarnessError::Oracle("the search needs a single-slot, single-device instance".into()));
    }
    if system.action_update != ActionUpdateMode::Additive || system.ris_mode != RisMode::Star {
        return Err(HarnessError::Oracle("the search needs additive updates on a STAR surface".into()));
    }
    let m = system.elements;
    let size = grid.size(m);
    if size > MAX_GRID_POINTS {
        return Err(HarnessError::Oracle(format!("{size} grid points exceed the limit of {MAX_GRID_POINTS}")));
    }
    let mut env = StarMecEnv::new(system.clone())?;
    env.reset(seed);
    let mut best: Option<(f64, OraclePoint)> = None;
    let (mut evaluated, mut feasible) = (0usize, 0usize);
    for pi in 0..grid.phase_combinations(m) {
        let phases = grid.phases(m, pi);
        for &beta_r in &grid.beta_r {
            for &power_w in &grid.power_w {
                for &lambda in &grid.lambda {
                    for &displacement in &grid.displacements {
                        let point = OraclePoint {
                            lambda,
                            power_w,
                            beta_r,
                            phases: phases.clone(),
                            displacement,
                        };
                        evaluated += 1;
                        if let Some(e) = evaluate_point(&env, &point)? {
                            feasible += 1;
                            if best.as_ref().is_none_or(|(b, _)| e < *b) {
                                best = Some((e, point));
                            }
                        }
                    }
                }
            }
        }
    }
    match best {
        Some((min_energy_j, argmin)) => Ok(OracleResult {
            min_energy_j,
            argmin,
            evaluated,
            feasible,
        }),
        None => Err(HarnessError::NoFeasiblePoint { evaluated }),
    }
}

/// PPO trained on the oracle instance alone, then replayed greedily on it.
#[derive(Debug, Clone)]
pub struct InstancePolicyRun {
    pub energy_j: f64,
    pub feasible: bool,
    pub trace: EpisodeTrace,
}

pub fn ppo_on_instance(cfg: &ExperimentConfig, seed: u64) -> Result<InstancePolicyRun> {
    let o = &cfg.oracle;
    let sys = oracle_instance(&cfg.system, o.elements);
    let tc = TrainConfig {
        iterations: o.ppo_iterations,
        episodes_per_iteration: o.ppo_episodes_per_iteration,
        episode_seed: Some(o.instance_seed),
        ..cfg.training.train_config(seed)?
    };
    let out = train(&sys, &tc)?;
    let mut env = StarMecEnv::new(sys)?;
    let mut ctl = PpoController::new(out.agent.params, &env, "star_ppo")?;
    let trace = run_episode(&mut env, &mut ctl, o.instance_seed)?;
    let v = trace.violation_counts();
    Ok(InstancePolicyRun {
        energy_j: total_energy(&trace).total,
        feasible: v.deadline == 0 && !v.capacity,
        trace,
    })
}
