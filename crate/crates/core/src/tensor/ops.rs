use crate::error::{Error, Result};

use super::counter::OpCounter;
use super::fixed::QTensor;
use super::pow2::{Pow2Weight, E_MIN};

/// A weight type the accumulate kernels can consume.
///
/// `accumulate` returns `activation × weight` on an accumulator grid that is
/// `ACC_SHIFT` bits finer than the activation grid, so the partial products
/// stay exact in 64 bits.
pub trait KernelWeight: Copy + Send + Sync {
    const ACC_SHIFT: u32;

    fn is_zero(&self) -> bool;

    fn accumulate(&self, activation: i32) -> i64;

    fn to_real(&self) -> f64;

    /// Nearest representable weight.
    fn quantize(w: f64) -> Self;
}

impl KernelWeight for Pow2Weight {
    const ACC_SHIFT: u32 = (-(E_MIN as i32)) as u32;

    #[inline]
    fn is_zero(&self) -> bool {
        self.sign() == 0
    }

    /// One arithmetic shift and a conditional negate; no multiply.
    #[inline]
    fn accumulate(&self, activation: i32) -> i64 {
        let shifted = (activation as i64) << (self.exponent() as i32 - E_MIN as i32);
        if self.sign() < 0 {
            -shifted
        } else {
            shifted
        }
    }

    fn to_real(&self) -> f64 {
        self.value()
    }

    fn quantize(w: f64) -> Self {
        super::pow2::quantize_pow2(w)
    }
}

/// Fractional bits of [`FixedWeight`].
pub const FIXED_WEIGHT_FRAC_BITS: u32 = 16;

/// Unconstrained Q16 weight, multiplied in. Used for the regular
/// (non-pow2) baseline network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct FixedWeight(pub i32);

impl FixedWeight {
    pub fn from_real(w: f64) -> Self {
        FixedWeight(super::fixed::encode(w, FIXED_WEIGHT_FRAC_BITS))
    }
}

impl KernelWeight for FixedWeight {
    const ACC_SHIFT: u32 = FIXED_WEIGHT_FRAC_BITS;

    #[inline]
    fn is_zero(&self) -> bool {
        self.0 == 0
    }

    #[inline]
    fn accumulate(&self, activation: i32) -> i64 {
        activation as i64 * self.0 as i64
    }

    fn to_real(&self) -> f64 {
        self.0 as f64 / (1u64 << FIXED_WEIGHT_FRAC_BITS) as f64
    }

    fn quantize(w: f64) -> Self {
        Self::from_real(w)
    }
}

/// Shift an accumulator back onto the activation grid, rounding half away
/// from zero and saturating to `i32`.
#[inline]
pub fn rescale_accumulator(acc: i64, shift: u32) -> i32 {
    let v = if shift == 0 {
        acc
    } else {
        let half = 1i64 << (shift - 1);
        if acc >= 0 {
            acc.saturating_add(half) >> shift
        } else {
            -((acc.saturating_neg().saturating_add(half)) >> shift)
        }
    };
    v.clamp(i32::MIN as i64, i32::MAX as i64) as i32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Conv2dGeometry {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl Conv2dGeometry {
    pub fn weight_count(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel * self.kernel
    }

    /// Output `(height, width)` for an input of `(height, width)`.
    pub fn output_size(&self, height: usize, width: usize) -> Option<(usize, usize)> {
        Some((
            conv_output_size(height, self.kernel, self.stride, self.padding)?,
            conv_output_size(width, self.kernel, self.stride, self.padding)?,
        ))
    }

    /// Accumulates a dense implementation performs on this input size.
    pub fn dense_ops(&self, height: usize, width: usize) -> Option<u64> {
        let (ho, wo) = self.output_size(height, width)?;
        Some((self.out_channels * ho * wo * self.in_channels * self.kernel * self.kernel) as u64)
    }
}

/// `floor((n + 2·padding − kernel) / stride) + 1`, or `None` if the kernel
/// does not fit.
pub fn conv_output_size(n: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    if stride == 0 || kernel == 0 || n + 2 * padding < kernel {
        return None;
    }
    Some((n + 2 * padding - kernel) / stride + 1)
}

/// Cross-correlation of a `[C_in, H, W]` tensor with `[C_out, C_in, K, K]`
/// weights. Taps reading a zero activation (including padding) or a zero
/// weight are skipped and counted as such.
pub fn conv2d<W: KernelWeight>(
    input: &QTensor,
    weights: &[W],
    bias: &[i32],
    geom: &Conv2dGeometry,
    counter: &mut OpCounter,
) -> Result<QTensor> {
    let &[c_in, h, w] = input.shape() else {
        return Err(Error::contract(format!("conv input must be [C, H, W], got {:?}", input.shape())));
    };
    if c_in != geom.in_channels {
        return Err(Error::contract(format!("conv expects {} input channels, input has {c_in}", geom.in_channels)));
    }
    if weights.len() != geom.weight_count() {
        return Err(Error::contract(format!(
            "conv weights: expected {} = {}x{}x{}x{}, got {}",
            geom.weight_count(),
            geom.out_channels,
            geom.in_channels,
            geom.kernel,
            geom.kernel,
            weights.len()
        )));
    }
    if bias.len() != geom.out_channels {
        return Err(Error::contract(format!("conv bias: expected {} entries, got {}", geom.out_channels, bias.len())));
    }
    let (ho, wo) = geom.output_size(h, w).ok_or_else(|| {
        Error::contract(format!(
            "kernel {} stride {} padding {} does not fit input {h}x{w}",
            geom.kernel, geom.stride, geom.padding
        ))
    })?;

    let k = geom.kernel;
    let data = input.data();
    let mut out = vec![0i32; geom.out_channels * ho * wo];
    let mut done = 0u64;
    let mut skipped = 0u64;

    for co in 0..geom.out_channels {
        let w_co = &weights[co * c_in * k * k..(co + 1) * c_in * k * k];
        for oy in 0..ho {
            for ox in 0..wo {
                let mut acc = (bias[co] as i64) << W::ACC_SHIFT;
                let y0 = (oy * geom.stride) as isize - geom.padding as isize;
                let x0 = (ox * geom.stride) as isize - geom.padding as isize;
                for ci in 0..c_in {
                    let plane = &data[ci * h * w..(ci + 1) * h * w];
                    let w_ci = &w_co[ci * k * k..(ci + 1) * k * k];
                    for ky in 0..k {
                        let iy = y0 + ky as isize;
                        if iy < 0 || iy >= h as isize {
                            skipped += k as u64;
                            continue;
                        }
                        let row = &plane[iy as usize * w..(iy as usize + 1) * w];
                        for kx in 0..k {
                            let ix = x0 + kx as isize;
                            if ix < 0 || ix >= w as isize {
                                skipped += 1;
                                continue;
                            }
                            let a = row[ix as usize];
                            let wt = w_ci[ky * k + kx];
                            if a == 0 || wt.is_zero() {
                                skipped += 1;
                            } else {
                                acc = acc.saturating_add(wt.accumulate(a));
                                done += 1;
                            }
                        }
                    }
                }
                out[(co * ho + oy) * wo + ox] = rescale_accumulator(acc, W::ACC_SHIFT);
            }
        }
    }

    counter.shift_adds_done += done;
    counter.accumulates_skipped += skipped;
    counter.dense_total += geom.dense_ops(h, w).expect("geometry checked above");
    QTensor::new(vec![geom.out_channels, ho, wo], input.frac_bits(), out)
}

/// Power-of-two convolution: every product is a shift.
pub fn conv2d_shift(
    input: &QTensor,
    weights: &[Pow2Weight],
    bias: &[i32],
    geom: &Conv2dGeometry,
    counter: &mut OpCounter,
) -> Result<QTensor> {
    conv2d(input, weights, bias, geom, counter)
}

/// Dense layer over the flattened input; `weights` is `[outputs, inputs]`
/// row-major.
pub fn fully_connected<W: KernelWeight>(
    input: &QTensor,
    weights: &[W],
    bias: &[i32],
    counter: &mut OpCounter,
) -> Result<QTensor> {
    let n_in = input.len();
    let n_out = bias.len();
    if n_out == 0 || weights.len() != n_out * n_in {
        return Err(Error::contract(format!(
            "fully connected: weights {} != outputs {n_out} x inputs {n_in}",
            weights.len()
        )));
    }
    let x = input.data();
    let mut out = Vec::with_capacity(n_out);
    let mut done = 0u64;
    for (row, &b) in weights.chunks_exact(n_in).zip(bias) {
        let mut acc = (b as i64) << W::ACC_SHIFT;
        for (&a, wt) in x.iter().zip(row) {
            if a != 0 && !wt.is_zero() {
                acc = acc.saturating_add(wt.accumulate(a));
                done += 1;
            }
        }
        out.push(rescale_accumulator(acc, W::ACC_SHIFT));
    }
    let dense = (n_out * n_in) as u64;
    counter.shift_adds_done += done;
    counter.accumulates_skipped += dense - done;
    counter.dense_total += dense;
    QTensor::new(vec![n_out], input.frac_bits(), out)
}

pub fn fully_connected_shift(
    input: &QTensor,
    weights: &[Pow2Weight],
    bias: &[i32],
    counter: &mut OpCounter,
) -> Result<QTensor> {
    fully_connected(input, weights, bias, counter)
}

/// LeakyReLU negative slope `2^-shift`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LeakySlope {
    shift: u8,
}

impl LeakySlope {
    pub const MAX_SHIFT: u8 = 30;

    pub fn from_shift(shift: u8) -> Result<Self> {
        if shift > Self::MAX_SHIFT {
            return Err(Error::contract(format!("leaky slope shift {shift} exceeds {}", Self::MAX_SHIFT)));
        }
        Ok(Self { shift })
    }

    /// Accepts only exact powers of two in `(0, 1]`.
    pub fn from_real(slope: f64) -> Result<Self> {
        let not_pow2 = || Error::contract(format!("leaky slope {slope} is not 2^-k for k in 0..=30"));
        if !(slope > 0.0 && slope <= 1.0) {
            return Err(not_pow2());
        }
        let k = -slope.log2().round();
        if !(0.0..=Self::MAX_SHIFT as f64).contains(&k) || 2f64.powi(-(k as i32)) != slope {
            return Err(not_pow2());
        }
        Self::from_shift(k as u8)
    }

    pub fn shift(&self) -> u8 {
        self.shift
    }

    pub fn value(&self) -> f64 {
        2f64.powi(-(self.shift as i32))
    }
}

impl Default for LeakySlope {
    fn default() -> Self {
        Self { shift: 3 }
    }
}

/// Negative inputs are arithmetic-shifted right by the slope's shift.
pub fn leaky_relu(x: &QTensor, slope: LeakySlope) -> QTensor {
    let mut out = x.clone();
    for v in out.data_mut() {
        if *v < 0 {
            *v >>= slope.shift;
        }
    }
    out
}

/// Logistic function of a decoded fixed-point logit, kept strictly inside
/// `(0, 1)`.
pub fn sigmoid_score(logit: i32, frac_bits: u32) -> f64 {
    let x: f64 = super::fixed::decode(logit, frac_bits);
    let s = 1.0 / (1.0 + (-x).exp());
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}
