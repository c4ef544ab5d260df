//! Dense tensors, layers, dropout, losses, reverse-mode gradients and Adam.

mod adam;
mod dropout;
pub mod init;
mod layers;
mod param;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use dropout::{dropout, DropoutMask, Mode};
pub use layers::{
    conv_text_forward, euclidean_distance, fc_forward, l1_loss, l1_loss_mean, l2_loss, max_pool, Activation,
};
pub use param::{Gradients, ParamId, ParamStore, Parameter};
pub use tape::{NodeId, Tape};
pub use tensor::Tensor;

pub(crate) use layers::fm_kernel;
