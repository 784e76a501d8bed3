//! Rollout storage and generalised advantage estimation.

use crate::error::{AgentError, Result};

/// Flat, row-major transition storage. Transitions of one trajectory are
/// contiguous; `dones[t]` marks the last step of an episode.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub obs: Vec<f64>,
    /// Pre-squash Gaussian samples.
    pub raw_actions: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    /// Advantages before normalisation.
    pub raw_advantages: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn new(obs_dim: usize, act_dim: usize) -> Self {
        Self {
            obs_dim,
            act_dim,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn push(&mut self, obs: &[f64], raw_action: &[f64], log_prob: f64, reward: f64, value: f64, done: bool) -> Result<()> {
        if obs.len() != self.obs_dim {
            return Err(AgentError::Shape {
                what: "buffered observation",
                expected: self.obs_dim,
                got: obs.len(),
            });
        }
        if raw_action.len() != self.act_dim {
            return Err(AgentError::Shape {
                what: "buffered action",
                expected: self.act_dim,
                got: raw_action.len(),
            });
        }
        self.obs.extend_from_slice(obs);
        self.raw_actions.extend_from_slice(raw_action);
        self.log_probs.push(log_prob);
        self.rewards.push(reward);
        self.values.push(value);
        self.dones.push(done);
        self.raw_advantages.clear();
        self.advantages.clear();
        self.returns.clear();
        Ok(())
    }

    pub fn obs_row(&self, t: usize) -> &[f64] {
        &self.obs[t * self.obs_dim..(t + 1) * self.obs_dim]
    }

    pub fn action_row(&self, t: usize) -> &[f64] {
        &self.raw_actions[t * self.act_dim..(t + 1) * self.act_dim]
    }

    pub fn has_advantages(&self) -> bool {
        !self.is_empty() && self.advantages.len() == self.len()
    }

    /// GAE(`gamma`, `lambda`) advantages and returns `A + V`.
    ///
    /// `bootstrap` is the value of the state following the final stored
    /// transition and is ignored when that transition ends an episode.
    pub fn compute_returns_and_advantages(&mut self, gamma: f64, lambda: f64, bootstrap: f64, normalize: bool) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(AgentError::EmptyBuffer);
        }
        let mut adv = vec![0.0; n];
        let mut next_value = bootstrap;
        let mut running = 0.0;
        for t in (0..n).rev() {
            let nonterminal = if self.dones[t] { 0.0 } else { 1.0 };
            if self.dones[t] {
                running = 0.0;
            }
            let delta = self.rewards[t] + gamma * next_value * nonterminal - self.values[t];
            running = delta + gamma * lambda * nonterminal * running;
            adv[t] = running;
            next_value = self.values[t];
        }
        self.returns = adv.iter().zip(&self.values).map(|(a, v)| a + v).collect();
        self.raw_advantages = adv.clone();
        if normalize {
            normalize_in_place(&mut adv);
        }
        self.advantages = adv;
        Ok(())
    }
}

/// Zero mean, unit (population) variance; constant inputs map to zeros.
pub fn normalize_in_place(x: &mut [f64]) {
    let n = x.len() as f64;
    if x.is_empty() {
        return;
    }
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    for v in x.iter_mut() {
        *v = if std > 1e-12 { (*v - mean) / std } else { 0.0 };
    }
}
