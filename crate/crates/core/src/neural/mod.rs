//! Minimal differentiable numerics shared by the encoder, selector and reader.

pub mod adam;
pub mod checkpoint;
pub mod dropout;
pub mod gradcheck;
pub mod linalg;
pub mod lstm;
pub mod ops;
pub mod params;
pub mod tensor;

pub use adam::{adam_step, AdamState};
pub use dropout::{dropout_mask, Mode};
pub use gradcheck::{grad_check, GradCheckReport};
pub use lstm::{bilstm, BiLstmParams, LstmParams};
pub use ops::{cross_entropy, softmax};
pub use params::{Hyperparams, Parameters};
pub use tensor::{NamedTensor, Tensor};
