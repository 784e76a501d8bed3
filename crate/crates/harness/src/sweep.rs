//! Training and evaluation jobs behind every sweep.
//!
//! Learned policies are trained once per `(scheme, elements, seed)` and
//! kept in a [`PolicyStore`]. The input-size sweep reuses the policies
//! trained on the random task-size range and evaluates them with every
//! task pinned to the grid value. Jobs run on the rayon pool and are merged
//! in a fixed order, so the output does not depend on scheduling.

use std::collections::BTreeMap;

use rayon::prelude::*;
use starmec_agent::train::derive_seed;
use starmec_agent::{train, LearningCurve, PolicyParams};
use starmec_core::baselines::run_episode;
use starmec_core::{EpisodeTrace, StarMecEnv, SystemConfig};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::results::ResultRow;
use crate::schemes::Scheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Task size in Mbit.
    InputBits,
    /// Surface element count.
    Elements,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::InputBits => "input_bits",
            Axis::Elements => "elements",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "input_bits" => Ok(Axis::InputBits),
            "elements" => Ok(Axis::Elements),
            _ => Err(HarnessError::Argument(format!("unknown axis `{s}` (input_bits | elements)"))),
        }
    }

    /// System configuration at one grid value.
    pub fn apply(self, base: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let mut sys = base.clone();
        match self {
            Axis::InputBits => sys.fixed_input_bits = Some(value * 1e6),
            Axis::Elements => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(HarnessError::Argument(format!("element count {value} is not a positive integer")));
                }
                sys.elements = value as usize;
            }
        }
        Ok(sys)
    }

    /// Configuration the learned policies for this grid value train on.
    fn training_system(self, base: &SystemConfig, value: f64) -> Result<SystemConfig> {
        match self {
            Axis::InputBits => Ok(base.clone()),
            Axis::Elements => self.apply(base, value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct PolicyKey {
    pub scheme: Scheme,
    pub elements: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct TrainedPolicy {
    pub params: PolicyParams,
    pub curve: LearningCurve,
}

#[derive(Debug, Default)]
pub struct PolicyStore {
    pub policies: BTreeMap<PolicyKey, TrainedPolicy>,
}

impl PolicyStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &PolicyKey) -> Option<&TrainedPolicy> {
        self.policies.get(key)
    }

    /// Trains every requested policy that is not stored yet. `system` must
    /// be the scheme-independent base with the key's element count.
    pub fn ensure(&mut self, cfg: &ExperimentConfig, jobs: &[(PolicyKey, SystemConfig)]) -> Result<()> {
        let todo: Vec<&(PolicyKey, SystemConfig)> = jobs
            .iter()
            .filter(|(k, _)| k.scheme.is_learned() && !self.policies.contains_key(k))
            .collect();
        let trained: Vec<(PolicyKey, TrainedPolicy)> = todo
            .par_iter()
            .map(|(key, base)| {
                let sys = key.scheme.system(base);
                let tc = cfg.training.train_config(key.seed)?;
                let out = train(&sys, &tc)?;
                Ok((
                    *key,
                    TrainedPolicy {
                        params: out.agent.params,
                        curve: out.curve,
                    },
                ))
            })
            .collect::<Result<_>>()?;
        self.policies.extend(trained);
        Ok(())
    }
}

/// Seed of evaluation episode `episode` for training seed `seed`. Uses its
/// own [`derive_seed`] tag, so it does not replay the training episodes.
pub fn eval_episode_seed(seed: u64, episode: usize) -> u64 {
    derive_seed(derive_seed(seed, 0xE7A1), episode as u64)
}

/// Plays `episodes` greedy episodes of `scheme` on `base` (scheme variant applied here).
pub fn evaluate(base: &SystemConfig, scheme: Scheme, params: Option<&PolicyParams>, seed: u64, episodes: usize) -> Result<Vec<EpisodeTrace>> {
    let sys = scheme.system(base);
    let mut env = StarMecEnv::new(sys)?;
    let mut ctl = scheme.controller(&env, params, derive_seed(seed, 0x5EED))?;
    (0..episodes)
        .map(|e| Ok(run_episode(&mut env, ctl.as_mut(), eval_episode_seed(seed, e))?))
        .collect()
}

/// Runs `schemes x grid x seeds`, training what is missing from `store`.
/// Rows come back ordered by scheme (as given), grid value, then seed.
pub fn run_sweep(cfg: &ExperimentConfig, axis: Axis, grid: &[f64], schemes: &[Scheme], store: &mut PolicyStore) -> Result<Vec<ResultRow>> {
    let seeds = &cfg.sweep.seeds;
    let mut train_jobs = Vec::new();
    for &scheme in schemes.iter().filter(|s| s.is_learned()) {
        for &value in grid {
            let sys = axis.training_system(&cfg.system, value)?;
            for &seed in seeds {
                let key = PolicyKey {
                    scheme,
                    elements: sys.elements,
                    seed,
                };
                if !train_jobs.iter().any(|(k, _)| *k == key) {
                    train_jobs.push((key, sys.clone()));
                }
            }
        }
    }
    store.ensure(cfg, &train_jobs)?;

    let mut cells = Vec::new();
    for (si, &scheme) in schemes.iter().enumerate() {
        for (vi, &value) in grid.iter().enumerate() {
            for &seed in seeds {
                cells.push((si, vi, scheme, value, seed));
            }
        }
    }
    let store = &*store;
    let mut rows: Vec<((usize, usize, u64), ResultRow)> = cells
        .par_iter()
        .map(|&(si, vi, scheme, value, seed)| {
            let sys = axis.apply(&cfg.system, value)?;
            let params = if scheme.is_learned() {
                let key = PolicyKey {
                    scheme,
                    elements: sys.elements,
                    seed,
                };
                Some(&store.get(&key).expect("trained above").params)
            } else {
                None
            };
            let traces = evaluate(&sys, scheme, params, seed, cfg.sweep.eval_episodes)?;
            Ok(((si, vi, seed), ResultRow::from_traces(scheme.name(), axis.name(), value, seed, &traces)))
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}
