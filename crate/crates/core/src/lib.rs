//! Simulator for a UAV-mounted STAR-RIS that relays partially offloaded
//! computation from ground devices to a base-station edge server.
//!
//! The crate is split along the physical pipeline: [`mobility`] moves the
//! aerial platform, [`channel`] draws and combines the cascaded links,
//! [`compute`] turns rates into latency and energy, and [`env`] wraps all of
//! it as an episodic control problem. [`baselines`] holds fixed reference
//! controllers.

pub mod baselines;
pub mod channel;
pub mod compute;
pub mod config;
pub mod env;
pub mod error;
pub mod mobility;
pub mod trace;

pub use channel::{Region, StarCoefficients};
pub use compute::{EnergyBreakdown, TaskSpec};
pub use config::{ActionUpdateMode, RewardConfig, RisMode, SystemConfig};
pub use env::{ActionSpace, ControlAction, Observation, StarMecEnv, StepOutcome};
pub use error::{Result, SimError};
pub use mobility::Position3;
pub use trace::{EpisodeTrace, SlotRecord, Violations};
