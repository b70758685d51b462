use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("split fractions sum to {0}, expected 1")]
    FractionSum(f64),

    #[error("split fraction {0} is outside (0, 1)")]
    FractionRange(f64),

    #[error("split would leave the {0} part empty")]
    EmptyPart(&'static str),

    #[error("length mismatch: {left} predictions vs {right} labels")]
    LengthMismatch { left: usize, right: usize },

    #[error("epsilon {0} is outside [0, 1]")]
    Epsilon(f64),

    #[error("model chain needs at least 2 models, got {0}")]
    ChainTooShort(usize),

    #[error("declared cost {cost} at position {index} is negative, non-finite or below its predecessor")]
    ChainCost { index: usize, cost: f64 },

    #[error("model index {index} out of range for a chain of {len}")]
    ModelIndex { index: usize, len: usize },

    #[error("feature vector has length {got}, model expects {expected}")]
    FeatureDim { expected: usize, got: usize },

    #[error("invalid model configuration: {0}")]
    Config(String),

    #[error("training diverged: loss became non-finite at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("energy meter: {0}")]
    Meter(String),

    #[error("carbon intensity {0} must be non-negative")]
    CarbonIntensity(f64),
}
