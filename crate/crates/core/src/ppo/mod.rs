//! Proximal policy optimization: advantage estimation, clipped surrogate,
//! rollout storage and the training loop.

pub mod buffer;
pub mod gae;
pub mod log;
pub mod normalizer;
pub mod surrogate;
pub mod trainer;

pub use buffer::RolloutBuffer;
pub use gae::compute_gae;
pub use log::{IterationRecord, TrainingLog, Trend, CSV_HEADER};
pub use normalizer::RunningNorm;
pub use surrogate::{clipped_surrogate, surrogate_loss};
pub use trainer::{
    clip_grad_norm, minibatch_loss_and_grads, LossCoefs, LossStats, Minibatch, PpoConfig,
    TrainSetup, Trainer, TrainerState,
};
