use thiserror::Error;

use crate::types::Letter;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("outcome set must contain at least one label")]
    EmptyOutcomeSet,

    #[error("duplicate outcome label `{0}`")]
    DuplicateLabel(String),

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("expected {expected} weights, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("weight {value} for `{label}` is outside [0, 1]")]
    WeightOutOfRange { label: String, value: f64 },

    #[error("weights sum to {0}, expected 1")]
    NotNormalized(f64),

    #[error("distributions are defined over different outcome sets")]
    OutcomeSetMismatch,

    #[error(
        "device {device} emits alpha with probability {p}; both letters must be emitted \
         with positive probability"
    )]
    DegenerateCoin { device: u8, p: f64 },

    #[error("a binary partition must send at least one label to each letter")]
    ImproperPartition,

    #[error("labels mapped to {0} carry zero probability; both letters must have positive probability")]
    ZeroMassPart(Letter),

    #[error("stopping threshold must be positive and finite, got {0}")]
    InvalidThreshold(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empirical distribution has no samples")]
    EmptySample,

    #[error("successor construction is inconsistent: {0}")]
    Inconsistent(String),

    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),

    #[error("player `{0}` needs at least two continue actions")]
    TooFewContinueActions(String),

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid sunspot profile: {0}")]
    InvalidSunspot(String),

    #[error("quit probabilities are identically zero; play never terminates")]
    NoFiniteHorizon,

    #[error("threshold calibration failed after {probes} probes (last threshold {last_threshold})")]
    CalibrationFailed { probes: usize, last_threshold: f64 },
}
