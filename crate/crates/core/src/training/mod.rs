//! Batching, the per-model update rules and the training loop.

mod config;
pub mod data;
mod run;
pub mod steps;

pub use config::{ProfileShuffle, TrainConfig, TransLoss};
pub use data::{fit_length, EncodedReview, ExampleBuilder, Partition, ProfileIndex, ProfileRules, TrainExample};
pub use run::{
    heldout_examples, train_loop, train_model, BestSelector, Checkpoint, EvalPoint, TrainObserver, TrainRun,
};
pub use steps::{
    deepconn_train_batch, mf_train_batch, train_batch, transnet_joint_batch, transnet_train_batch, BatchLosses,
    Optimizers, SubStepHook,
};
