use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("invalid config: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("amplitude coefficient {value} of element {element} outside [0, 1]")]
    AmplitudeOutOfRange { element: usize, value: f64 },

    #[error("incomplete trace: {have} of {want} slots recorded")]
    IncompleteTrace { have: usize, want: usize },

    #[error("episode already finished; call reset")]
    EpisodeFinished,

    #[error("trace io: {0}")]
    Io(#[from] std::io::Error),

    #[error("trace format: {0}")]
    Format(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
