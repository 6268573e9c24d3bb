//! Small dense-tensor engine: layers with exact hand-derived gradients,
//! AdaDelta, finite-difference gradient checking and checkpoints.
//!
//! Everything is `f64`. Models own a [`ParameterStore`] and refer to their
//! weights through [`ParamId`] handles.

mod checkpoint;
mod gradcheck;
mod layers;
mod optim;
mod params;
mod tensor;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use checkpoint::{format_checkpoint, parse_checkpoint, read_checkpoint, write_checkpoint, Manifest};
pub use gradcheck::{grad_check, CoordinateCheck, GradCheckReport};
pub(crate) use layers::{add_assign, matvec_acc, matvec_t_acc, outer_acc};
pub use layers::{
    conv1d_same, conv1d_same_backward, dense, gru_step, log_softmax, sigmoid, softmax, Activation, ConvLayer,
    DenseLayer, Embedding, GruCache, GruLayer, GruWeights,
};
pub use optim::{adadelta_update, AdaDeltaState, DEFAULT_EPSILON, DEFAULT_RHO};
pub use params::{ParamId, ParameterStore};
pub use tensor::Tensor;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("duplicate parameter `{0}`")]
    DuplicateParameter(String),
    #[error("loss is not finite")]
    NonFiniteLoss,
    #[error("checkpoint line {line}: {reason}")]
    Checkpoint { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NeuralError>;

/// The seeded generator used for all initialization and shuffling.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
