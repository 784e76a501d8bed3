//! The compared control schemes and how each one is built.

use serde::{Deserialize, Serialize};
use starmec_agent::{PolicyParams, PpoController};
use starmec_core::baselines::{conventional_ris_mode, Controller, FixedTrajectory, FullOffload, LocalOnly, RandomPolicy};
use starmec_core::{StarMecEnv, SystemConfig};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// PPO on the simultaneous transmit/reflect surface.
    StarPpo,
    /// PPO on a reflect-or-transmit surface that alternates by slot.
    ConvPpo,
    FixedTrajectory,
    FullOffload,
    LocalOnly,
    Random,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::StarPpo,
        Scheme::ConvPpo,
        Scheme::FixedTrajectory,
        Scheme::FullOffload,
        Scheme::LocalOnly,
        Scheme::Random,
    ];

    /// The four schemes swept by default.
    pub const BENCHMARKS: [Scheme; 4] = [Scheme::StarPpo, Scheme::ConvPpo, Scheme::FixedTrajectory, Scheme::FullOffload];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::StarPpo => "star_ppo",
            Scheme::ConvPpo => "conv_ppo",
            Scheme::FixedTrajectory => "fixed_trajectory",
            Scheme::FullOffload => "full_offload",
            Scheme::LocalOnly => "local_only",
            Scheme::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| HarnessError::Argument(format!("unknown scheme `{s}`")))
    }

    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        s.split(',').map(|p| Self::parse(p.trim())).collect()
    }

    pub fn is_learned(self) -> bool {
        matches!(self, Scheme::StarPpo | Scheme::ConvPpo)
    }

    /// Environment variant the scheme runs on.
    pub fn system(self, base: &SystemConfig) -> SystemConfig {
        match self {
            Scheme::ConvPpo => conventional_ris_mode(base),
            _ => base.clone(),
        }
    }

    /// Builds the controller. Learned schemes need trained parameters.
    pub fn controller(self, env: &StarMecEnv, params: Option<&PolicyParams>, seed: u64) -> Result<Box<dyn Controller>> {
        Ok(match self {
            Scheme::StarPpo | Scheme::ConvPpo => {
                let p = params.ok_or_else(|| HarnessError::Argument(format!("{} needs a trained policy", self.name())))?;
                Box::new(PpoController::new(p.clone(), env, self.name())?)
            }
            Scheme::FixedTrajectory => Box::new(FixedTrajectory::new()),
            Scheme::FullOffload => Box::new(FullOffload),
            Scheme::LocalOnly => Box::new(LocalOnly),
            Scheme::Random => Box::new(RandomPolicy::new(seed)),
        })
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
