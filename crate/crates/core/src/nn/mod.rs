//! Minimal dense neural-network core: f32 tensors, convolution, pooling,
//! fully connected layers, activations, SGD, a weights container, and a
//! finite-difference gradient checker.

pub mod gradcheck;
mod layer;
mod network;
mod ops;
mod optim;
mod tensor;
mod weights;

pub use layer::{Layer, LayerSpec, Param};
pub use network::Network;
pub use ops::{
    conv2d, conv2d_backward, leaky_relu, leaky_relu_backward, linear, linear_backward, maxpool2d,
    maxpool2d_backward, sigmoid, sigmoid_backward,
};
pub use optim::{sgd_step, Sgd};
pub use tensor::Tensor;
pub use weights::{decode_weights, encode_weights, load_weights, save_weights, WEIGHTS_MAGIC};

/// Default negative slope of the leaky activation.
pub const DEFAULT_LEAKY_SLOPE: f32 = 0.1;
