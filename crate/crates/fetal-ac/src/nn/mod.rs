//! Minimal neural-network engine: tensors, the four layer types used by the
//! pipeline, softmax cross-entropy, and ADAM.
//!
//! The engine is generic over [`Scalar`] so the same code trains in f32 and
//! gradient-checks in f64.

mod adam;
mod layer;
mod net;
mod scalar;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use layer::{
    dropout, Activation, ConvLayer, DropoutMode, FcLayer, MaxPoolLayer, PoolRounding,
};
pub use net::{
    loss_and_grads, softmax, softmax_cross_entropy, Gradients, LayerSpec, Sequential,
    SequentialSpec, Tape, TapeEntry, Value, ValueShape,
};
pub use scalar::{matmul, Scalar};
pub use tensor::Tensor3;
