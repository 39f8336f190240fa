use thiserror::Error;

/// Errors raised while building or evaluating a model.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SkmError {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unknown event {event} at t={t}")]
    UnknownEvent { t: usize, event: usize },

    /// Hazards are per-step probabilities, so anything above one is a modeling error.
    #[error("hazard overflow at t={t}{}: total {value}", .event.map(|k| format!(", event {k}")).unwrap_or_default())]
    HazardOverflow {
        t: usize,
        event: Option<usize>,
        value: f64,
    },

    #[error("joint state space of {states} states exceeds the cap of {cap}")]
    StateSpaceTooLarge { states: u128, cap: usize },

    #[error("observations have zero probability under the model at t={t}")]
    ImpossibleEvidence { t: usize },

    #[error("particle weights collapsed at t={t}")]
    WeightCollapse { t: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {msg}")]
    Io { path: String, msg: String },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
}

pub type Result<T> = std::result::Result<T, SkmError>;
