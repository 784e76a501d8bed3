use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment config: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("cannot parse config {path}: {message}")]
    ConfigParse { path: PathBuf, message: String },

    #[error("bad argument: {0}")]
    Argument(String),

    #[error("checkpoint not found: {0}")]
    MissingCheckpoint(PathBuf),

    #[error("oracle: no feasible point among {evaluated} grid points")]
    NoFeasiblePoint { evaluated: usize },

    #[error("oracle: {0}")]
    Oracle(String),

    #[error("plot: {0}")]
    Plot(String),

    #[error(transparent)]
    Sim(#[from] starmec_core::SimError),

    #[error(transparent)]
    Agent(#[from] starmec_agent::AgentError),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;
