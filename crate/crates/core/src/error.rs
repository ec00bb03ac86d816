use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("unknown normal form `{0}`")]
    UnknownNormalForm(String),

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("loop passes too close to a zero of the field (segment length {step:.3e})")]
    LoopTooClose { step: f64 },

    #[error("splitting function invalid at ({x1}, {x2}): {reason}")]
    InvalidSplitting { x1: f64, x2: f64, reason: String },
}
