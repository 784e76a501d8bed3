use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("empty rollout buffer")]
    EmptyBuffer,

    #[error("advantages not computed before update")]
    MissingAdvantages,

    #[error("non-finite {what} at iteration {iteration}, epoch {epoch}: update aborted")]
    NonFinite {
        what: &'static str,
        iteration: usize,
        epoch: usize,
    },

    #[error("invalid PPO config: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Sim(#[from] starmec_core::SimError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AgentError>;
