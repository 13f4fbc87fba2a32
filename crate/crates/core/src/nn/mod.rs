//! Minimal deterministic deep-learning engine.
//!
//! Tensors at the public boundary are [`Tensor4`](crate::Tensor4) in
//! (batch, frequency, time, channel) order. Internally each example is kept
//! channel-planar, `[channel][frequency][time]`, so the convolution inner
//! loops run over contiguous time samples.

mod activation;
mod adam;
mod conv;
mod loss;
mod weights;

pub use activation::{activation_backward, activation_forward, Activation};
pub use adam::{adam_step, AdamConfig, AdamState};
pub use conv::{
    conv2d_backward, conv2d_forward, from_planar, to_planar, ConvGrads, ConvLayer, ConvLayerSpec,
    TimePadding,
};
pub use loss::{bce_loss, mse_loss, BCE_EPS};
pub use weights::{read_weights, save_weights, load_weights, write_weights, WEIGHTS_MAGIC, WEIGHTS_VERSION};

pub(crate) use conv::{backward_planar, forward_planar, to_planar_into};
pub(crate) use loss::{bce_into, mse_into};
