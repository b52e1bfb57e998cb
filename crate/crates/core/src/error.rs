use thiserror::Error;

/// Errors surfaced by the simulator and the learning stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("causality violation: event scheduled at step {at} but clock is at {now}")]
    Causality { at: u64, now: u64 },

    #[error("vehicle out of range: distance {distance:.1} m exceeds radius {radius:.1} m")]
    OutOfRange { distance: f64, radius: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("action has zero probability under the policy")]
    ZeroProbabilityAction,

    #[error("parameter layout mismatch for module {0}")]
    LayoutMismatch(String),

    #[error("non-finite values in gradient for module {0}")]
    NonFinite(String),

    #[error("empty sequence")]
    EmptySequence,

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
