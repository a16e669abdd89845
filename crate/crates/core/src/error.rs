use thiserror::Error;

use crate::harness::sweep::PrescanPoint;

pub type Result<T, E = SimError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no trim solution in envelope: {0}")]
    Envelope(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("outside closed-form regime: {0}")]
    OutOfRegime(String),

    #[error("predicate is not monotone across the prescan ({} points)", prescan.len())]
    NonMonotone { prescan: Vec<PrescanPoint> },

    #[error("numeric divergence at t={t:.3}s: {detail}")]
    Diverged { t: f64, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SimError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        SimError::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
