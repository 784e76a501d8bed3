//! Clipped-surrogate PPO with separate actor and critic networks.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adam::Adam;
use crate::buffer::RolloutBuffer;
use crate::dist::{gaussian_entropy, sample, squash, squashed_log_prob};
use crate::error::{AgentError, Result};
use crate::mlp::{global_norm, Activation, Mlp, MlpGrads};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig {
    pub clip_eps: f64,
    /// Discount factor.
    pub gamma: f64,
    pub gae_lambda: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub init_log_std: f64,
    pub normalize_advantages: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip_eps: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            epochs: 4,
            minibatch: 64,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            entropy_coef: 0.01,
            max_grad_norm: 0.5,
            hidden: vec![128, 128],
            activation: Activation::Tanh,
            init_log_std: -0.5,
            normalize_advantages: true,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            bad.push("clip_eps must lie in (0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            bad.push("gamma must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            bad.push("gae_lambda must lie in [0, 1]");
        }
        if self.epochs == 0 || self.minibatch == 0 {
            bad.push("epochs and minibatch must be positive");
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            bad.push("learning rates must be positive");
        }
        if !(self.max_grad_norm > 0.0) {
            bad.push("max_grad_norm must be positive");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(AgentError::Config(bad.join("; ")))
        }
    }
}

/// Actor mean network, state-independent log standard deviations and critic.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub actor: Mlp,
    pub log_std: Vec<f64>,
    pub critic: Mlp,
}

impl PolicyParams {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, act_dim: usize, cfg: &PpoConfig, rng: &mut R) -> Self {
        let sizes = |out: usize| -> Vec<usize> {
            let mut s = vec![obs_dim];
            s.extend(&cfg.hidden);
            s.push(out);
            s
        };
        Self {
            actor: Mlp::new(&sizes(act_dim), cfg.activation, 0.01, rng),
            log_std: vec![cfg.init_log_std; act_dim],
            critic: Mlp::new(&sizes(1), cfg.activation, 1.0, rng),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.actor.output_dim()
    }

    pub fn is_finite(&self) -> bool {
        self.actor.is_finite() && self.critic.is_finite() && self.log_std.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    /// Pre-squash means, one row per observation.
    pub mean: Array2<f64>,
    pub log_std: Vec<f64>,
    pub value: Vec<f64>,
}

pub fn policy_forward(params: &PolicyParams, obs: ArrayView2<f64>) -> Result<PolicyOutput> {
    let mean = params.actor.forward(obs)?;
    let value = params.critic.forward(obs)?.column(0).to_vec();
    Ok(PolicyOutput {
        mean,
        log_std: params.log_std.clone(),
        value,
    })
}

/// `min(r A, clip(r, 1-eps, 1+eps) A)` for one sample.
pub fn clipped_objective(ratio: f64, advantage: f64, eps: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - eps, 1.0 + eps) * advantage)
}

/// Negative mean clipped objective.
pub fn clipped_surrogate_loss(new_logp: &[f64], old_logp: &[f64], advantages: &[f64], eps: f64) -> f64 {
    let n = new_logp.len() as f64;
    -new_logp
        .iter()
        .zip(old_logp)
        .zip(advantages)
        .map(|((n, o), a)| clipped_objective((n - o).exp(), *a, eps))
        .sum::<f64>()
        / n
}

#[derive(Debug, Clone)]
pub struct ActorGrads {
    pub net: MlpGrads,
    pub log_std: Vec<f64>,
}

impl ActorGrads {
    pub fn norm(&self) -> f64 {
        let mut s = self.net.param_slices();
        s.push(&self.log_std);
        global_norm(&s)
    }

    fn scale(&mut self, c: f64) {
        for s in self.net.param_slices_mut() {
            s.iter_mut().for_each(|v| *v *= c);
        }
        self.log_std.iter_mut().for_each(|v| *v *= c);
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ActorBatchStats {
    /// Surrogate loss minus the entropy bonus.
    pub loss: f64,
    pub surrogate: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub max_ratio_deviation: f64,
}

/// Actor loss and its exact gradient on one minibatch.
pub fn actor_loss_and_grads(
    params: &PolicyParams,
    obs: ArrayView2<f64>,
    raw_actions: ArrayView2<f64>,
    old_logp: &[f64],
    advantages: &[f64],
    cfg: &PpoConfig,
) -> Result<(ActorBatchStats, ActorGrads)> {
    let b = obs.nrows();
    let a_dim = params.act_dim();
    if raw_actions.ncols() != a_dim {
        return Err(AgentError::Shape {
            what: "raw action",
            expected: a_dim,
            got: raw_actions.ncols(),
        });
    }
    let (mean, cache) = params.actor.forward_cached(obs)?;
    let inv_var: Vec<f64> = params.log_std.iter().map(|ls| (-2.0 * ls).exp()).collect();
    let mut d_mean = Array2::<f64>::zeros((b, a_dim));
    let mut d_log_std = vec![0.0; a_dim];
    let mut stats = ActorBatchStats::default();
    let eps = cfg.clip_eps;
    let bf = b as f64;
    for i in 0..b {
        let u = raw_actions.row(i);
        let u = u.as_slice().expect("contiguous row");
        let m = mean.row(i);
        let m = m.as_slice().expect("contiguous row");
        let new_lp = squashed_log_prob(u, m, &params.log_std);
        let log_ratio = new_lp - old_logp[i];
        let ratio = log_ratio.exp();
        let adv = advantages[i];
        stats.surrogate -= clipped_objective(ratio, adv, eps) / bf;
        stats.approx_kl += ((ratio - 1.0) - log_ratio) / bf;
        if (ratio - 1.0).abs() > eps {
            stats.clip_fraction += 1.0 / bf;
        }
        stats.max_ratio_deviation = stats.max_ratio_deviation.max((ratio - 1.0).abs());
        // The unclipped branch carries the gradient whenever it is the minimum.
        let unclipped = ratio * adv <= ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
        if !unclipped {
            continue;
        }
        let g = -adv * ratio / bf;
        for j in 0..a_dim {
            let diff = u[j] - m[j];
            d_mean[[i, j]] = g * diff * inv_var[j];
            d_log_std[j] += g * (diff * diff * inv_var[j] - 1.0);
        }
    }
    stats.entropy = gaussian_entropy(&params.log_std);
    stats.loss = stats.surrogate - cfg.entropy_coef * stats.entropy;
    for v in d_log_std.iter_mut() {
        *v -= cfg.entropy_coef;
    }
    let net = params.actor.backward(&cache, d_mean.view());
    Ok((stats, ActorGrads { net, log_std: d_log_std }))
}

/// Mean squared error of the critic against `returns` and its gradient.
pub fn critic_loss_and_grads(params: &PolicyParams, obs: ArrayView2<f64>, returns: &[f64]) -> Result<(f64, MlpGrads)> {
    let (v, cache) = params.critic.forward_cached(obs)?;
    let bf = obs.nrows() as f64;
    let mut dv = Array2::<f64>::zeros((obs.nrows(), 1));
    let mut loss = 0.0;
    for i in 0..obs.nrows() {
        let e = v[[i, 0]] - returns[i];
        loss += e * e / bf;
        dv[[i, 0]] = 2.0 * e / bf;
    }
    Ok((loss, params.critic.backward(&cache, dv.view())))
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    /// `max |ratio - 1|` on the first minibatch, before any parameter moved.
    pub first_ratio_deviation: f64,
    pub actor_grad_norm: f64,
}

fn clip_norm(slices: &mut [&mut [f64]], max_norm: f64) -> f64 {
    let norm = slices.iter().flat_map(|s| s.iter()).map(|v| v * v).sum::<f64>().sqrt();
    if norm > max_norm {
        let c = max_norm / norm;
        for s in slices.iter_mut() {
            s.iter_mut().for_each(|v| *v *= c);
        }
    }
    norm
}

#[derive(Debug, Clone)]
pub struct PpoAgent {
    pub params: PolicyParams,
    pub cfg: PpoConfig,
    pub actor_opt: Adam,
    pub critic_opt: Adam,
    shuffle_rng: ChaCha8Rng,
}

impl PpoAgent {
    pub fn new(obs_dim: usize, act_dim: usize, cfg: PpoConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = PolicyParams::new(obs_dim, act_dim, &cfg, &mut rng);
        Ok(Self::from_params(params, cfg, rng.random()))
    }

    pub fn from_params(params: PolicyParams, cfg: PpoConfig, shuffle_seed: u64) -> Self {
        Self {
            actor_opt: Adam::new(cfg.actor_lr),
            critic_opt: Adam::new(cfg.critic_lr),
            params,
            cfg,
            shuffle_rng: ChaCha8Rng::seed_from_u64(shuffle_seed),
        }
    }

    /// Samples raw actions for a batch; returns `(raw, log_prob, value)` per row.
    pub fn act_batch<R: Rng + ?Sized>(&self, obs: ArrayView2<f64>, rng: &mut R) -> Result<Vec<(Vec<f64>, f64, f64)>> {
        let out = policy_forward(&self.params, obs)?;
        Ok((0..obs.nrows())
            .map(|i| {
                let m = out.mean.row(i).to_vec();
                let u = sample(&m, &out.log_std, rng);
                let lp = squashed_log_prob(&u, &m, &out.log_std);
                (u, lp, out.value[i])
            })
            .collect())
    }

    /// Squashed mean action.
    pub fn greedy(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, obs.len()), obs).map_err(|_| AgentError::Shape {
            what: "observation",
            expected: self.params.obs_dim(),
            got: obs.len(),
        })?;
        let out = self.params.actor.forward(x)?;
        Ok(squash(out.row(0).as_slice().expect("contiguous row")))
    }

    pub fn values(&self, obs: ArrayView2<f64>) -> Result<Vec<f64>> {
        Ok(self.params.critic.forward(obs)?.column(0).to_vec())
    }

    /// Runs `epochs` shuffled minibatch passes over `buffer`. The buffer's
    /// log-probabilities come from the parameters that collected it, which
    /// act as the frozen behaviour policy for the whole update.
    pub fn update(&mut self, buffer: &RolloutBuffer, iteration: usize) -> Result<UpdateStats> {
        if buffer.is_empty() {
            return Err(AgentError::EmptyBuffer);
        }
        if !buffer.has_advantages() {
            return Err(AgentError::MissingAdvantages);
        }
        let n = buffer.len();
        let obs_dim = buffer.obs_dim;
        let act_dim = buffer.act_dim;
        let mut idx: Vec<usize> = (0..n).collect();
        let mut stats = UpdateStats::default();
        let mut batches = 0.0;
        let mut first = true;
        for epoch in 0..self.cfg.epochs {
            idx.shuffle(&mut self.shuffle_rng);
            for chunk in idx.chunks(self.cfg.minibatch) {
                let b = chunk.len();
                let mut obs = Array2::<f64>::zeros((b, obs_dim));
                let mut act = Array2::<f64>::zeros((b, act_dim));
                let mut old_lp = Vec::with_capacity(b);
                let mut adv = Vec::with_capacity(b);
                let mut ret = Vec::with_capacity(b);
                for (r, &t) in chunk.iter().enumerate() {
                    obs.row_mut(r).assign(&ndarray::aview1(buffer.obs_row(t)));
                    act.row_mut(r).assign(&ndarray::aview1(buffer.action_row(t)));
                    old_lp.push(buffer.log_probs[t]);
                    adv.push(buffer.advantages[t]);
                    ret.push(buffer.returns[t]);
                }
                let (a_stats, mut a_grads) =
                    actor_loss_and_grads(&self.params, obs.view(), act.view(), &old_lp, &adv, &self.cfg)?;
                let (c_loss, mut c_grads) = critic_loss_and_grads(&self.params, obs.view(), &ret)?;
                if !a_stats.loss.is_finite() {
                    return Err(AgentError::NonFinite {
                        what: "actor loss",
                        iteration,
                        epoch,
                    });
                }
                if !c_loss.is_finite() {
                    return Err(AgentError::NonFinite {
                        what: "critic loss",
                        iteration,
                        epoch,
                    });
                }
                if first {
                    stats.first_ratio_deviation = a_stats.max_ratio_deviation;
                    first = false;
                }

                let a_norm = a_grads.norm();
                if a_norm > self.cfg.max_grad_norm {
                    a_grads.scale(self.cfg.max_grad_norm / a_norm);
                }
                clip_norm(&mut c_grads.param_slices_mut(), self.cfg.max_grad_norm);

                let mut a_params = self.params.actor.param_slices_mut();
                a_params.push(self.params.log_std.as_mut_slice());
                let mut a_g = a_grads.net.param_slices();
                a_g.push(&a_grads.log_std);
                self.actor_opt.update(a_params, &a_g);
                for ls in self.params.log_std.iter_mut() {
                    *ls = ls.clamp(LOG_STD_MIN, LOG_STD_MAX);
                }
                self.critic_opt
                    .update(self.params.critic.param_slices_mut(), &c_grads.param_slices());

                stats.actor_loss += a_stats.loss;
                stats.critic_loss += c_loss;
                stats.entropy += a_stats.entropy;
                stats.approx_kl += a_stats.approx_kl;
                stats.clip_fraction += a_stats.clip_fraction;
                stats.actor_grad_norm += a_norm;
                batches += 1.0;
            }
        }
        if !self.params.is_finite() {
            return Err(AgentError::NonFinite {
                what: "parameters",
                iteration,
                epoch: self.cfg.epochs,
            });
        }
        stats.actor_loss /= batches;
        stats.critic_loss /= batches;
        stats.entropy /= batches;
        stats.approx_kl /= batches;
        stats.clip_fraction /= batches;
        stats.actor_grad_norm /= batches;
        Ok(stats)
    }
}
