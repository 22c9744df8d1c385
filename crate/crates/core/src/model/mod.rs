//! Factorized-attention trajectory forecaster.
//!
//! Agent states and map patches are embedded by MLPs, refined by stacked
//! blocks of temporal (causal), interaction (across agents) and context
//! (agent-to-map) attention, and decoded at the last observed step into a
//! Gaussian mixture over future positions. Gradients come from a small
//! reverse-mode tape in [`graph`].

pub mod checkpoint;
mod config;
pub mod gmm;
pub mod gradcheck;
pub mod graph;
pub mod network;
pub mod optim;
pub mod params;
pub mod tensor;
pub mod train;

pub use checkpoint::Checkpoint;
pub use config::{Anchor, DecodeFrame, NllForm, LossConfig, ModelConfig, Pooling};
pub use gmm::{GmmHead, GmmPrediction, GmmTarget, LossReport};
pub use gradcheck::{gradient_check, relative_error, GradCheck};
pub use graph::{Gradients, Graph, Pattern, RowMix, Var};
pub use network::{positional_encoding, ModeTrajectory, Model, Prediction, SceneInput};
pub use optim::{Adam, AdamConfig};
pub use params::{param_count, ModelParams, ParamId};
pub use tensor::Tensor;
pub use train::{adam_for, trainable, batch_loss_and_grad, train, TrainConfig, TrainReport};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("backward called without a recorded forward pass")]
    GraphNotRecorded,
    #[error("no valid future step to score")]
    DegenerateMask,
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
