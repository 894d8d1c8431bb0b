//! Activation denoising: soft and hard thresholding and Euclidean
//! projection onto the ℓ1-ball.
//!
//! Projection onto `{x : ‖x‖₁ ≤ ε}` reduces to soft thresholding with a
//! data-dependent `θ*`; [`project_l1_ball`] finds `θ*` by sorting magnitudes
//! and then calls [`soft_threshold`] so the two routes agree bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::{encode, QTensor};

/// How one layer's activations are denoised.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ThresholdMode {
    #[default]
    None,
    Soft {
        theta: f64,
    },
    Hard {
        theta: f64,
    },
    L1Ball {
        epsilon: f64,
    },
}

impl ThresholdMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ThresholdMode::None => Ok(()),
            ThresholdMode::Soft { theta } | ThresholdMode::Hard { theta } => {
                if theta.is_finite() && theta >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::contract(format!("theta must be finite and >= 0, got {theta}")))
                }
            }
            ThresholdMode::L1Ball { epsilon } => {
                if epsilon.is_finite() && epsilon > 0.0 {
                    Ok(())
                } else {
                    Err(Error::contract(format!("epsilon must be finite and > 0, got {epsilon}")))
                }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ThresholdMode::None => "none",
            ThresholdMode::Soft { .. } => "soft",
            ThresholdMode::Hard { .. } => "hard",
            ThresholdMode::L1Ball { .. } => "l1ball",
        }
    }

    /// θ for the thresholding modes, ε for the ball.
    pub fn parameter(&self) -> Option<f64> {
        match *self {
            ThresholdMode::None => None,
            ThresholdMode::Soft { theta } | ThresholdMode::Hard { theta } => Some(theta),
            ThresholdMode::L1Ball { epsilon } => Some(epsilon),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerThreshold {
    pub layer: usize,
    #[serde(flatten)]
    pub mode: ThresholdMode,
}

/// Per-layer denoising configuration; at most one entry per layer, kept
/// sorted by layer index. Layers without an entry are not denoised.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ThresholdSpec {
    entries: Vec<LayerThreshold>,
}

impl ThresholdSpec {
    pub fn new(mut entries: Vec<LayerThreshold>) -> Result<Self> {
        entries.sort_by_key(|e| e.layer);
        for pair in entries.windows(2) {
            if pair[0].layer == pair[1].layer {
                return Err(Error::contract(format!("duplicate threshold entry for layer {}", pair[0].layer)));
            }
        }
        for e in &entries {
            e.mode.validate()?;
        }
        Ok(Self { entries })
    }

    /// No denoising anywhere.
    pub fn disabled() -> Self {
        Self::default()
    }

    /// One mode per layer, starting at layer 0. `None` entries are dropped.
    pub fn per_layer(modes: &[ThresholdMode]) -> Result<Self> {
        Self::new(
            modes
                .iter()
                .enumerate()
                .filter(|(_, m)| **m != ThresholdMode::None)
                .map(|(layer, &mode)| LayerThreshold { layer, mode })
                .collect(),
        )
    }

    pub fn entries(&self) -> &[LayerThreshold] {
        &self.entries
    }

    pub fn mode(&self, layer: usize) -> ThresholdMode {
        self.entries.iter().find(|e| e.layer == layer).map(|e| e.mode).unwrap_or_default()
    }

    pub fn is_disabled(&self) -> bool {
        self.entries.iter().all(|e| e.mode == ThresholdMode::None)
    }

    pub fn check_layers(&self, layer_count: usize) -> Result<()> {
        match self.entries.iter().find(|e| e.layer >= layer_count) {
            Some(e) => Err(Error::contract(format!(
                "threshold targets layer {} but the model has {layer_count} denoisable layers",
                e.layer
            ))),
            None => Ok(()),
        }
    }
}

fn check_theta<T: Real>(theta: T) -> Result<()> {
    if theta >= T::zero() && theta.is_finite() {
        Ok(())
    } else {
        Err(Error::contract(format!("theta must be finite and >= 0, got {theta}")))
    }
}

#[inline]
fn soft_scalar<T: Real>(x: T, theta: T) -> T {
    let w = (x.abs() - theta).max(T::zero());
    if x < T::zero() {
        -w
    } else {
        w
    }
}

#[inline]
fn hard_scalar<T: Real>(x: T, theta: T) -> T {
    if x.abs() > theta {
        x
    } else {
        T::zero()
    }
}

/// `u_i = sgn(x_i) · max(|x_i| − θ, 0)`.
pub fn soft_threshold<T: Real>(x: &[T], theta: T) -> Result<Vec<T>> {
    check_theta(theta)?;
    Ok(x.iter().map(|&v| soft_scalar(v, theta)).collect())
}

/// Keeps `x_i` when `|x_i| > θ`, zero otherwise.
pub fn hard_threshold<T: Real>(x: &[T], theta: T) -> Result<Vec<T>> {
    check_theta(theta)?;
    Ok(x.iter().map(|&v| hard_scalar(v, theta)).collect())
}

/// Result of an ℓ1-ball projection.
#[derive(Debug, Clone, PartialEq)]
pub struct L1Projection<T> {
    pub point: Vec<T>,
    /// Shrinkage applied to every magnitude; zero when the input was
    /// already inside the ball.
    pub theta: T,
}

/// Shrinkage `θ*` with `Σ max(|x_i| − θ*, 0) = ε`, or `None` when
/// `‖x‖₁ ≤ ε` already. O(n log n) by sorting magnitudes.
pub fn l1_ball_threshold<T: Real>(x: &[T], epsilon: T) -> Result<Option<T>> {
    if !(epsilon > T::zero()) || !epsilon.is_finite() {
        return Err(Error::contract(format!("epsilon must be finite and > 0, got {epsilon}")));
    }
    let norm: T = x.iter().map(|v| v.abs()).sum();
    if norm <= epsilon {
        return Ok(None);
    }
    let mut mags: Vec<T> = x.iter().map(|v| v.abs()).collect();
    mags.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite input"));

    // largest rho with mags[rho] > (cumsum[..=rho] - eps) / (rho + 1)
    let mut cumsum = T::zero();
    let mut theta = T::zero();
    for (j, &m) in mags.iter().enumerate() {
        cumsum += m;
        let candidate = (cumsum - epsilon) / T::from_usize(j + 1).expect("length fits scalar");
        if m > candidate {
            theta = candidate;
        } else {
            break;
        }
    }
    Ok(Some(theta.max(T::zero())))
}

/// Euclidean projection onto `{x : ‖x‖₁ ≤ ε}`.
pub fn project_l1_ball<T: Real>(x: &[T], epsilon: T) -> Result<L1Projection<T>> {
    match l1_ball_threshold(x, epsilon)? {
        None => Ok(L1Projection { point: x.to_vec(), theta: T::zero() }),
        Some(theta) => Ok(L1Projection { point: soft_threshold(x, theta)?, theta }),
    }
}

/// Apply one layer's mode to a fixed-point activation tensor.
///
/// Thresholds are compared against decoded values and the result is
/// re-encoded at the tensor's own precision.
pub fn apply_denoising(activations: &QTensor, mode: &ThresholdMode) -> Result<QTensor> {
    mode.validate()?;
    let frac_bits = activations.frac_bits();
    let mut out = activations.clone();
    match *mode {
        ThresholdMode::None => {}
        ThresholdMode::Soft { theta } => {
            for q in out.data_mut() {
                if *q != 0 {
                    let x: f64 = crate::tensor::decode(*q, frac_bits);
                    *q = encode(soft_scalar(x, theta), frac_bits);
                }
            }
        }
        ThresholdMode::Hard { theta } => {
            for q in out.data_mut() {
                let x: f64 = crate::tensor::decode(*q, frac_bits);
                if x.abs() <= theta {
                    *q = 0;
                }
            }
        }
        ThresholdMode::L1Ball { epsilon } => {
            let x: Vec<f64> = activations.to_real();
            let projected = project_l1_ball(&x, epsilon)?;
            for (q, v) in out.data_mut().iter_mut().zip(projected.point) {
                *q = encode(v, frac_bits);
            }
        }
    }
    Ok(out)
}
