//! Rollout collection and the outer training loop.
//!
//! Each iteration plays `episodes_per_iteration` full episodes in lockstep
//! batches of `parallel_envs` environments (one batched forward pass per
//! slot), computes GAE over the resulting buffer and runs one PPO update.
//! Every random draw derives from `TrainConfig::seed`, so two runs with the
//! same configuration produce identical learning curves.

use std::io::Write;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use starmec_core::baselines::Controller;
use starmec_core::{ControlAction, Observation, StarMecEnv, SystemConfig};

use crate::buffer::RolloutBuffer;
use crate::dist::squash;
use crate::error::{AgentError, Result};
use crate::ppo::{PolicyParams, PpoAgent, PpoConfig, UpdateStats};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub ppo: PpoConfig,
    pub iterations: usize,
    pub episodes_per_iteration: usize,
    pub parallel_envs: usize,
    pub seed: u64,
    /// Pins every episode to one environment seed, turning training into
    /// optimisation of a single instance.
    pub episode_seed: Option<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            ppo: PpoConfig::default(),
            iterations: 200,
            episodes_per_iteration: 16,
            parallel_envs: 8,
            seed: 0,
            episode_seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationStats {
    pub iteration: usize,
    /// Mean undiscounted episode return of this iteration's rollouts.
    pub mean_reward: f64,
    pub mean_energy_j: f64,
    pub clip_fraction: f64,
    pub kl: f64,
    pub update: UpdateStats,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LearningCurve {
    pub rows: Vec<IterationStats>,
}

impl LearningCurve {
    pub const HEADER: &'static str = "iteration,mean_reward,mean_energy_J,clip_fraction,kl";

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::HEADER)?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.iteration, r.mean_reward, r.mean_energy_j, r.clip_fraction, r.kl
            )?;
        }
        Ok(())
    }

    /// Mean reward over the last `n` iterations.
    pub fn tail_mean_reward(&self, n: usize) -> Option<f64> {
        let k = n.min(self.rows.len());
        if k == 0 {
            return None;
        }
        Some(self.rows[self.rows.len() - k..].iter().map(|r| r.mean_reward).sum::<f64>() / k as f64)
    }
}

/// splitmix64 over two words.
pub fn derive_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub struct Trainer {
    pub agent: PpoAgent,
    pub cfg: TrainConfig,
    envs: Vec<StarMecEnv>,
    sample_rng: ChaCha8Rng,
    iteration: usize,
}

impl Trainer {
    pub fn new(system: &SystemConfig, cfg: TrainConfig) -> Result<Self> {
        if cfg.parallel_envs == 0 || cfg.episodes_per_iteration == 0 {
            return Err(AgentError::Config(
                "parallel_envs and episodes_per_iteration must be positive".into(),
            ));
        }
        let envs = (0..cfg.parallel_envs.min(cfg.episodes_per_iteration))
            .map(|_| StarMecEnv::new(system.clone()))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let obs_dim = envs[0].observation_dim();
        let act_dim = envs[0].action_space().dim();
        let agent = PpoAgent::new(obs_dim, act_dim, cfg.ppo.clone(), derive_seed(cfg.seed, 1))?;
        Ok(Self {
            agent,
            sample_rng: ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 2)),
            envs,
            cfg,
            iteration: 0,
        })
    }

    /// Plays one iteration's episodes with the current stochastic policy.
    /// Returns the filled buffer, mean return and mean total energy.
    pub fn collect(&mut self) -> Result<(RolloutBuffer, f64, f64)> {
        let obs_dim = self.agent.params.obs_dim();
        let act_dim = self.agent.params.act_dim();
        let mut buffer = RolloutBuffer::new(obs_dim, act_dim);
        let mut returns = Vec::new();
        let mut energies = Vec::new();
        let mut done_episodes = 0;
        while done_episodes < self.cfg.episodes_per_iteration {
            let e = self.envs.len().min(self.cfg.episodes_per_iteration - done_episodes);
            let mut obs: Vec<Observation> = (0..e)
                .map(|i| {
                    let seed = self.cfg.episode_seed.unwrap_or_else(|| {
                        derive_seed(
                            derive_seed(self.cfg.seed, 3),
                            ((self.iteration as u64) << 24) | (done_episodes + i) as u64,
                        )
                    });
                    self.envs[i].reset(seed)
                })
                .collect();
            let mut traj: Vec<Vec<(Vec<f64>, Vec<f64>, f64, f64, f64, bool)>> = vec![Vec::new(); e];
            let mut live = true;
            while live {
                let mut batch = Array2::<f64>::zeros((e, obs_dim));
                for (i, o) in obs.iter().enumerate() {
                    batch.row_mut(i).assign(&ndarray::aview1(o.as_slice()));
                }
                let acts = self.agent.act_batch(batch.view(), &mut self.sample_rng)?;
                live = false;
                for (i, (u, lp, v)) in acts.into_iter().enumerate() {
                    let out = self.envs[i].step_squashed(&squash(&u))?;
                    let prev = std::mem::replace(&mut obs[i], out.observation);
                    traj[i].push((prev.0, u, lp, out.reward, v, out.done));
                    live |= !out.done;
                }
            }
            for (i, t) in traj.into_iter().enumerate() {
                returns.push(t.iter().map(|s| s.3).sum::<f64>());
                energies.push(starmec_core::compute::total_energy(self.envs[i].trace()).total);
                for (o, u, lp, r, v, d) in t {
                    buffer.push(&o, &u, lp, r, v, d)?;
                }
            }
            done_episodes += e;
        }
        let n = returns.len() as f64;
        Ok((buffer, returns.iter().sum::<f64>() / n, energies.iter().sum::<f64>() / n))
    }

    pub fn step(&mut self) -> Result<IterationStats> {
        let (mut buffer, mean_reward, mean_energy_j) = self.collect()?;
        let ppo = &self.agent.cfg;
        buffer.compute_returns_and_advantages(ppo.gamma, ppo.gae_lambda, 0.0, ppo.normalize_advantages)?;
        let update = self.agent.update(&buffer, self.iteration)?;
        let stats = IterationStats {
            iteration: self.iteration,
            mean_reward,
            mean_energy_j,
            clip_fraction: update.clip_fraction,
            kl: update.approx_kl,
            update,
        };
        self.iteration += 1;
        Ok(stats)
    }
}

pub struct TrainOutcome {
    pub agent: PpoAgent,
    pub curve: LearningCurve,
}

pub fn train(system: &SystemConfig, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(system, cfg, |_| {})
}

/// [`train`] with a per-iteration callback, e.g. for progress output.
pub fn train_with(system: &SystemConfig, cfg: &TrainConfig, mut on_iteration: impl FnMut(&IterationStats)) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(system, cfg.clone())?;
    let mut curve = LearningCurve::default();
    for _ in 0..cfg.iterations {
        let s = trainer.step()?;
        on_iteration(&s);
        curve.rows.push(s);
    }
    Ok(TrainOutcome {
        agent: trainer.agent,
        curve,
    })
}

/// Deterministic controller executing the squashed policy mean.
#[derive(Debug, Clone)]
pub struct PpoController {
    pub params: PolicyParams,
    name: String,
}

impl PpoController {
    pub fn new(params: PolicyParams, env: &StarMecEnv, name: impl Into<String>) -> Result<Self> {
        if params.obs_dim() != env.observation_dim() {
            return Err(AgentError::Shape {
                what: "policy observation width",
                expected: env.observation_dim(),
                got: params.obs_dim(),
            });
        }
        if params.act_dim() != env.action_space().dim() {
            return Err(AgentError::Shape {
                what: "policy action width",
                expected: env.action_space().dim(),
                got: params.act_dim(),
            });
        }
        Ok(Self {
            params,
            name: name.into(),
        })
    }

    pub fn squashed_action(&self, obs: &Observation) -> Vec<f64> {
        let x = ndarray::ArrayView2::from_shape((1, obs.len()), obs.as_slice()).expect("row view");
        let mean = self.params.actor.forward(x).expect("width checked at construction");
        squash(mean.row(0).as_slice().expect("contiguous row"))
    }
}

impl Controller for PpoController {
    fn name(&self) -> &str {
        &self.name
    }

    fn act(&mut self, env: &StarMecEnv, obs: &Observation) -> ControlAction {
        let a = self.squashed_action(obs);
        env.action_space().decode(&a).expect("width checked at construction")
    }
}
