//! Reference controllers the learned policy is compared against.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ActionUpdateMode, RisMode, SystemConfig};
use crate::env::{ControlAction, Observation, StarMecEnv};
use crate::error::Result;
use crate::mobility::Position3;
use crate::trace::EpisodeTrace;

/// Anything that maps the current environment state to an action.
pub trait Controller {
    fn name(&self) -> &str;

    /// Called after every `reset`.
    fn begin_episode(&mut self, _env: &StarMecEnv) {}

    fn act(&mut self, env: &StarMecEnv, obs: &Observation) -> ControlAction;
}

/// Plays one full episode and returns its trace.
pub fn run_episode<C: Controller + ?Sized>(env: &mut StarMecEnv, controller: &mut C, seed: u64) -> Result<EpisodeTrace> {
    let mut obs = env.reset(seed);
    env.set_label(controller.name().to_string());
    controller.begin_episode(env);
    loop {
        let action = controller.act(env, &obs);
        let out = env.step(&action)?;
        obs = out.observation;
        if out.done {
            break;
        }
    }
    Ok(env.take_trace())
}

/// Targets for [`steer`]; `None` leaves the quantity where it is.
#[derive(Debug, Clone, Default)]
pub struct SteerTarget {
    pub lambda: f64,
    pub position_xy: Option<[f64; 2]>,
    pub power_w: Option<f64>,
    pub beta_r: Option<f64>,
    pub phase: Option<f64>,
}

/// Builds the increments that move the current configuration towards the
/// targets, in whichever update mode the environment uses.
///
/// Hadamard factors cannot move a zero coordinate; such entries hold.
pub fn steer(env: &StarMecEnv, target: &SteerTarget) -> ControlAction {
    let cfg = env.config();
    let st = env.state();
    let mut a = ControlAction::hold(cfg, target.lambda);
    let hadamard = cfg.action_update == ActionUpdateMode::Hadamard;
    let toward = |cur: f64, want: f64| -> f64 {
        if hadamard {
            if cur > 0.0 && want > 0.0 {
                (want / cur).ln()
            } else {
                0.0
            }
        } else {
            want - cur
        }
    };
    if let Some([x, y]) = target.position_xy {
        let q = st.position();
        let (dx, dy) = (x - q.x, y - q.y);
        let norm = dx.hypot(dy);
        let step = env.action_space().max_step_m;
        let s = if norm > step { step / norm } else { 1.0 };
        let (nx, ny) = (q.x + dx * s, q.y + dy * s);
        a.displacement = [toward(q.x, nx), toward(q.y, ny)];
    }
    if let Some(p) = target.power_w {
        for (d, cur) in a.delta_power.iter_mut().zip(&st.power_w) {
            *d = (p / cur).ln();
        }
    }
    if let Some(b) = target.beta_r {
        for (d, cur) in a.delta_beta_r.iter_mut().zip(&st.coeffs.beta_r) {
            *d = toward(*cur, b);
        }
    }
    if let Some(phi) = target.phase {
        for (d, cur) in a.delta_phi_r.iter_mut().zip(&st.coeffs.phi_r) {
            *d = toward(*cur, phi);
        }
        for (d, cur) in a.delta_phi_t.iter_mut().zip(&st.coeffs.phi_t) {
            *d = toward(*cur, phi);
        }
    }
    a
}

/// Nearest-neighbour tour over the devices at full speed, half offloading,
/// half power, zero phases and an even energy split.
#[derive(Debug, Clone, Default)]
pub struct FixedTrajectory {
    waypoints: Vec<[f64; 2]>,
    next: usize,
}

impl FixedTrajectory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Greedy nearest-neighbour order starting from `start`, closed back at `start`.
    pub fn tour(start: Position3, devices: &[Position3]) -> Vec<[f64; 2]> {
        let mut left: Vec<[f64; 2]> = devices.iter().map(|d| [d.x, d.y]).collect();
        let mut cur = [start.x, start.y];
        let mut out = Vec::with_capacity(left.len() + 1);
        while !left.is_empty() {
            let (i, _) = left
                .iter()
                .enumerate()
                .map(|(i, p)| (i, (p[0] - cur[0]).hypot(p[1] - cur[1])))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty");
            cur = left.swap_remove(i);
            out.push(cur);
        }
        out.push([start.x, start.y]);
        out
    }

    pub fn waypoints(&self) -> &[[f64; 2]] {
        &self.waypoints
    }
}

impl Controller for FixedTrajectory {
    fn name(&self) -> &str {
        "fixed_trajectory"
    }

    fn begin_episode(&mut self, env: &StarMecEnv) {
        self.waypoints = Self::tour(env.config().start(), env.devices());
        self.next = 0;
    }

    fn act(&mut self, env: &StarMecEnv, _obs: &Observation) -> ControlAction {
        let q = env.state().position();
        while self.next + 1 < self.waypoints.len() {
            let w = self.waypoints[self.next];
            if (w[0] - q.x).hypot(w[1] - q.y) > 1e-6 {
                break;
            }
            self.next += 1;
        }
        let cfg = env.config();
        steer(
            env,
            &SteerTarget {
                lambda: 0.5,
                position_xy: self.waypoints.get(self.next).copied(),
                power_w: Some(cfg.max_power_w / 2.0),
                beta_r: Some(0.5),
                phase: Some(0.0),
            },
        )
    }
}

/// Offloads every task from a stationary UAV at half power with default
/// surface settings.
#[derive(Debug, Clone, Copy, Default)]
pub struct FullOffload;

impl Controller for FullOffload {
    fn name(&self) -> &str {
        "full_offload"
    }

    fn act(&mut self, env: &StarMecEnv, _obs: &Observation) -> ControlAction {
        steer(
            env,
            &SteerTarget {
                lambda: 1.0,
                position_xy: None,
                power_w: Some(env.config().max_power_w / 2.0),
                beta_r: Some(0.5),
                phase: Some(0.0),
            },
        )
    }
}

/// Computes everything on the devices and never moves.
#[derive(Debug, Clone, Copy, Default)]
pub struct LocalOnly;

impl Controller for LocalOnly {
    fn name(&self) -> &str {
        "local_only"
    }

    fn act(&mut self, env: &StarMecEnv, _obs: &Observation) -> ControlAction {
        ControlAction::hold(env.config(), 0.0)
    }
}

/// Uniform squashed actions, decoded through the environment's action space.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Controller for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn act(&mut self, env: &StarMecEnv, _obs: &Observation) -> ControlAction {
        let space = env.action_space();
        let raw: Vec<f64> = (0..space.dim()).map(|_| self.rng.random_range(-1.0..=1.0)).collect();
        space.decode(&raw).expect("sampled action has the right shape")
    }
}

/// Same system restricted to reflect-only/transmit-only operation.
pub fn conventional_ris_mode(cfg: &SystemConfig) -> SystemConfig {
    SystemConfig {
        ris_mode: RisMode::Conventional,
        ..cfg.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tour_visits_every_device_once_and_closes() {
        let start = Position3::new(50.0, 0.0, 20.0);
        let devices = vec![
            Position3::new(10.0, 10.0, 0.0),
            Position3::new(60.0, 10.0, 0.0),
            Position3::new(90.0, 90.0, 0.0),
        ];
        let tour = FixedTrajectory::tour(start, &devices);
        assert_eq!(tour, vec![[60.0, 10.0], [10.0, 10.0], [90.0, 90.0], [50.0, 0.0]]);
    }
}
