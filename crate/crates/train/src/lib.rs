//! Training loop, greedy decoding and evaluation of the graph recognizer.

pub mod config;
pub mod decode;
pub mod eval;
pub mod metrics;
pub mod plot;
pub mod trainer;

use thiserror::Error;

pub use config::{ExperimentConfig, EvalConfig, TrainConfig};
pub use decode::{greedy_decode, ModelScorer, Negated, OracleScorer, Scorer};
pub use eval::{evaluate, EvalMetrics, SplitMetrics};
pub use trainer::{EvalReport, Progress, StepStats, Trainer};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Neural(#[from] grasp_neural::NeuralError),
    #[error("training diverged at {samples} samples: {source}")]
    Diverged {
        samples: u64,
        source: grasp_neural::NeuralError,
    },
    #[error(transparent)]
    Datagen(#[from] grasp_core::datagen::DatagenError),
    #[error(transparent)]
    Buffer(#[from] grasp_core::buffers::BufferError),
    #[error(transparent)]
    Env(#[from] grasp_core::mdp::EnvError),
    #[error("the oracle scorer needs the target graph")]
    OracleWithoutTarget,
    #[error("scorer returned {got} scores for {expected} candidates")]
    ScoreCount { expected: usize, got: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{0}")]
    Internal(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
