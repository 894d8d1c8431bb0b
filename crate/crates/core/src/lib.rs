//! Multiplication-free convolutional inference for optical-flow anomaly
//! detection.
//!
//! Weights are restricted to signed powers of two so every product in the
//! convolution and dense kernels is an arithmetic shift of a fixed-point
//! activation. Intermediate activations can be denoised by thresholding or
//! by projection onto an ℓ1-ball; zeroed values let the following layer
//! skip their accumulates.
//!
//! The surrounding pipeline lives here too. See [`data`] for flow
//! estimation and synthetic frames, [`train`] for quantization-aware
//! training, and [`eval`] for ROC/AUC sweeps.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // negated comparisons reject NaN

pub mod data;
pub mod denoise;
pub mod error;
pub mod eval;
pub mod network;
pub mod scalar;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Real;

/// Flow-magnitude frame as consumed by the network.
pub type Frame = data::Image<f32>;
/// Dense flow in single precision, the `.flo` storage type.
pub type FlowField32 = data::FlowField<f32>;
/// Dense flow in double precision.
pub type FlowField64 = data::FlowField<f64>;
/// Power-of-two model, the deployed configuration.
pub type Pow2Model = network::Model;
