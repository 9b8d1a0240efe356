//! Graph-conditioned image classifier with its own reverse-mode autodiff.

pub mod checkpoint;
pub mod model;
pub mod optim;
pub mod params;
pub mod scalar;
pub mod tape;

use thiserror::Error;

pub use checkpoint::Checkpoint;
pub use model::{LossAndGrad, Model, ModelConfig, Sample};
pub use optim::{clip_gradients, RAdam, RAdamConfig, Schedule};
pub use params::{global_norm, Grads, ParamSet};
pub use scalar::Scalar;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("{kind} color {color} outside embedding table of {limit}")]
    ColorOutOfRange { kind: &'static str, color: u8, limit: usize },
    #[error("image is {width}x{height}, model expects {expected}x{expected}")]
    ImageSize { expected: usize, width: usize, height: usize },
    #[error("parameters do not fit the model: {0}")]
    ParamMismatch(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("corrupt checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
