//! Differentiable story encoder and pointer decoder, with training,
//! checkpoints and finite-difference gradient verification.

pub mod checkpoint;
pub mod gradcheck;
pub mod model;
pub mod params;
pub mod tape;
pub mod train;

use std::fmt::Debug;

use thiserror::Error;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError, RunInfo};
pub use gradcheck::{grad_check, relative_error, GradCheckReport, ParamCheck};
pub use model::{entity_bucket, DecodeMode, EncoderOutput, Model};
pub use params::{init_params, layout, ModelConfig, ModelParams, ParamStore};
pub use train::{train, EpochStats, TrainConfig, TrainExample};

/// Floating-point type the network runs in (f32 for training, f64 for checks).
pub trait Scalar: num_traits::Float + Debug + Default + Send + Sync + 'static {}

impl<T: num_traits::Float + Debug + Default + Send + Sync + 'static> Scalar for T {}

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite state after message-passing round {round}")]
    NonFinite { round: usize },
    #[error("parameter error: {0}")]
    Params(String),
    #[error("training diverged at epoch {epoch}, batch {batch}: loss is not finite")]
    Diverged { epoch: usize, batch: usize },
    #[error("training needs non-empty train and validation sets")]
    EmptyData,
}
