//! Channel prediction workbench.
//!
//! A 2-D reflection-point channel simulator produces noisy OFDM channel
//! frequency responses over time; a small dilated causal CNN, trained with a
//! from-scratch backpropagation engine, forecasts sub-band magnitudes and
//! deep-fade events several steps ahead.
//!
//! Module map:
//! - [`sim`]: scene geometry, multipath synthesis and CFR extraction.
//! - [`stats`]: normalised covariance diagnostics of simulated channels.
//! - [`dataset`]: tensorization, labels, train/test split and the binary container.
//! - [`nn`]: rank-4 convolution engine, activations, losses and Adam.
//! - [`models`]: predictor and classifier networks plus the training loop.
//! - [`eval`]: per-step MSE, ROC/AUC and fresh-channel checks.
//! - [`profile`]: bundled full-scale and desk-scale run profiles.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod models;
pub mod nn;
pub mod profile;
pub mod report;
pub mod sim;
pub mod stats;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor4;

pub use num_complex::Complex64;
