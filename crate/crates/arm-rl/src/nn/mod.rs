//! Tensors, reverse-mode autodiff, network definitions, Adam, and
//! checkpointing — everything the agents need to represent and train their
//! policies, in plain `f64` for end-to-end reproducibility.

mod adam;
mod checkpoint;
mod net;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{load as load_checkpoint, save as save_checkpoint, CheckpointError};
pub use net::{forward, infer, init_params, Architecture, ForwardPass, Head, Layer, NetworkParams};
pub use tape::{Gradients, NnError, NodeId, Tape};
pub use tensor::Tensor;
