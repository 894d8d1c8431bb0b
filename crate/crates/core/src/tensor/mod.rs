//! Fixed-point activations, power-of-two weights and the shift-accumulate
//! kernels built on them.

mod counter;
mod fixed;
mod ops;
mod pow2;

pub use counter::OpCounter;
pub use fixed::{decode, encode, from_fixed, to_fixed, QTensor, DEFAULT_FRAC_BITS, MAX_FRAC_BITS};
pub use ops::{
    conv2d, conv2d_shift, conv_output_size, fully_connected, fully_connected_shift, leaky_relu, rescale_accumulator,
    sigmoid_score, Conv2dGeometry, FixedWeight, KernelWeight, LeakySlope, FIXED_WEIGHT_FRAC_BITS,
};
pub use pow2::{quantize_pow2, Pow2Weight, E_MAX, E_MIN};
