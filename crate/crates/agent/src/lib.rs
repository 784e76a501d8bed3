//! Proximal policy optimisation for the STAR-RIS MEC environment, built on a
//! small dense network with explicit gradients.

pub mod adam;
pub mod buffer;
pub mod checkpoint;
pub mod dist;
pub mod error;
pub mod gradcheck;
pub mod mlp;
pub mod ppo;
pub mod train;

pub use error::{AgentError, Result};
pub use mlp::{Activation, Mlp};
pub use ppo::{PolicyParams, PpoAgent, PpoConfig};
pub use train::{train, train_with, LearningCurve, PpoController, TrainConfig, TrainOutcome};
