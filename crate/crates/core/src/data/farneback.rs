//! Single-scale dense optical flow by polynomial expansion.
//!
//! Each frame is locally approximated by `f(p) ≈ pᵀAp + bᵀp + c` (weighted
//! least squares over a Gaussian-weighted window). For a displacement `d`,
//! `b₂ = b₁ − 2A d`, so `A d = −½(b₂ − b₁)`. The per-pixel constraint is
//! aggregated over a window and re-solved `iterations` times, each time
//! sampling the second frame's expansion at the current flow estimate.

use super::{FlowField, Image};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FarnebackParams {
    /// Odd window side for both the polynomial fit and the aggregation.
    pub window: usize,
    pub iterations: usize,
    /// Gaussian applicability of the polynomial fit; `None` picks
    /// `0.15·(window − 1) + 0.5`.
    pub sigma: Option<f64>,
}

impl Default for FarnebackParams {
    fn default() -> Self {
        Self { window: 7, iterations: 5, sigma: None }
    }
}

impl FarnebackParams {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(Error::contract(format!("window must be odd and >= 3, got {}", self.window)));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0) {
                return Err(Error::contract(format!("sigma must be positive, got {s}")));
            }
        }
        Ok(())
    }

    fn sigma(&self) -> f64 {
        self.sigma.unwrap_or(0.15 * (self.window - 1) as f64 + 0.5)
    }
}

/// Per-pixel expansion `[b_x, b_y, a_xx, a_yy, a_xy]`, with
/// `A = [[a_xx, a_xy/2], [a_xy/2, a_yy]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyField<T> {
    pub width: usize,
    pub height: usize,
    pub coeffs: Vec<[T; 5]>,
}

impl<T: Real> PolyField<T> {
    /// Bilinear sample at a real position, coordinates clamped to the image.
    fn sample(&self, x: T, y: T) -> [T; 5] {
        let maxx = T::from_usize(self.width - 1).expect("width fits scalar");
        let maxy = T::from_usize(self.height - 1).expect("height fits scalar");
        let x = x.max(T::zero()).min(maxx);
        let y = y.max(T::zero()).min(maxy);
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let x0 = x0.to_usize().expect("clamped");
        let y0 = y0.to_usize().expect("clamped");
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let at = |xx: usize, yy: usize| &self.coeffs[yy * self.width + xx];
        let (c00, c10, c01, c11) = (at(x0, y0), at(x1, y0), at(x0, y1), at(x1, y1));
        let one = T::one();
        std::array::from_fn(|k| {
            (one - fy) * ((one - fx) * c00[k] + fx * c10[k]) + fy * ((one - fx) * c01[k] + fx * c11[k])
        })
    }
}

/// Invert a small well-conditioned matrix by Gauss-Jordan with pivoting.
fn invert<const N: usize>(m: [[f64; N]; N]) -> Option<[[f64; N]; N]> {
    let mut a = m;
    let mut inv = [[0.0; N]; N];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for col in 0..N {
        let pivot = (col..N).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col];
        for k in 0..N {
            a[col][k] /= p;
            inv[col][k] /= p;
        }
        for r in 0..N {
            if r != col {
                let f = a[r][col];
                for k in 0..N {
                    a[r][k] -= f * a[col][k];
                    inv[r][k] -= f * inv[col][k];
                }
            }
        }
    }
    Some(inv)
}

/// Weighted least-squares quadratic fit around every pixel, with replicated
/// borders.
pub fn polynomial_expansion<T: Real>(img: &Image<T>, window: usize, sigma: f64) -> Result<PolyField<T>> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::contract(format!("window must be odd and >= 3, got {window}")));
    }
    let r = (window / 2) as isize;
    let offsets: Vec<(isize, isize)> = (-r..=r).flat_map(|dy| (-r..=r).map(move |dx| (dx, dy))).collect();
    let basis = |dx: f64, dy: f64| [1.0, dx, dy, dx * dx, dy * dy, dx * dy];
    let weight = |dx: f64, dy: f64| (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();

    let mut gram = [[0.0f64; 6]; 6];
    for &(dx, dy) in &offsets {
        let (dx, dy) = (dx as f64, dy as f64);
        let (b, a) = (basis(dx, dy), weight(dx, dy));
        for i in 0..6 {
            for j in 0..6 {
                gram[i][j] += a * b[i] * b[j];
            }
        }
    }
    let ginv = invert(gram).ok_or_else(|| Error::contract("polynomial basis is degenerate"))?;

    // Row k of `proj` maps window samples to coefficient k (skipping the
    // constant term, which the flow never uses).
    let proj: Vec<[T; 5]> = offsets
        .iter()
        .map(|&(dx, dy)| {
            let (dx, dy) = (dx as f64, dy as f64);
            let (b, a) = (basis(dx, dy), weight(dx, dy));
            std::array::from_fn(|k| {
                let row = &ginv[k + 1];
                T::lit(a * (0..6).map(|j| row[j] * b[j]).sum::<f64>())
            })
        })
        .collect();

    let (w, h) = (img.width(), img.height());
    let mut coeffs = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut c = [T::zero(); 5];
            for (&(dx, dy), p) in offsets.iter().zip(&proj) {
                let f = img.get_clamped(x + dx, y + dy);
                for k in 0..5 {
                    c[k] += p[k] * f;
                }
            }
            coeffs.push(c);
        }
    }
    Ok(PolyField { width: w, height: h, coeffs })
}

/// Dense flow from `frame_a` to `frame_b`: content at `p` in `frame_a` is
/// found at `p + (u, v)` in `frame_b`.
pub fn farneback_flow<T: Real>(
    frame_a: &Image<T>,
    frame_b: &Image<T>,
    params: &FarnebackParams,
) -> Result<FlowField<T>> {
    params.validate()?;
    let (w, h) = (frame_a.width(), frame_a.height());
    if (w, h) != (frame_b.width(), frame_b.height()) {
        return Err(Error::contract(format!(
            "frame sizes differ: {w}x{h} vs {}x{}",
            frame_b.width(),
            frame_b.height()
        )));
    }
    if w == 0 || h == 0 {
        return Err(Error::contract("frames are empty"));
    }
    let sigma = params.sigma();
    let p1 = polynomial_expansion(frame_a, params.window, sigma)?;
    let p2 = polynomial_expansion(frame_b, params.window, sigma)?;

    let half = T::lit(0.5);
    let mut flow = FlowField::zeros(w, h);
    // per-pixel [g11, g12, g22, h1, h2] of the normal equations
    let mut normal = vec![[T::zero(); 5]; w * h];
    for _ in 0..params.iterations.max(1) {
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let (du, dv) = flow.at(x, y);
                let c1 = &p1.coeffs[i];
                let c2 = p2.sample(T::from_usize(x).unwrap() + du, T::from_usize(y).unwrap() + dv);
                let a11 = (c1[2] + c2[2]) * half;
                let a22 = (c1[3] + c2[3]) * half;
                let a12 = (c1[4] + c2[4]) * half * half;
                let rx = -(c2[0] - c1[0]) * half + a11 * du + a12 * dv;
                let ry = -(c2[1] - c1[1]) * half + a12 * du + a22 * dv;
                normal[i] = [
                    a11 * a11 + a12 * a12,
                    a12 * (a11 + a22),
                    a12 * a12 + a22 * a22,
                    a11 * rx + a12 * ry,
                    a12 * rx + a22 * ry,
                ];
            }
        }
        let agg = box_aggregate(&normal, w, h, params.window / 2);
        for y in 0..h {
            for x in 0..w {
                let [g11, g12, g22, h1, h2] = agg[y * w + x];
                let det = g11 * g22 - g12 * g12;
                let scale = (g11 + g22) * (g11 + g22);
                if det > T::lit(1e-9) * scale && det > T::min_positive_value() {
                    flow.set(x, y, (g22 * h1 - g12 * h2) / det, (g11 * h2 - g12 * h1) / det);
                }
            }
        }
    }
    Ok(flow)
}

/// Separable box sum with replicated borders.
fn box_aggregate<T: Real>(m: &[[T; 5]], w: usize, h: usize, r: usize) -> Vec<[T; 5]> {
    let r = r as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![[T::zero(); 5]; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut s = [T::zero(); 5];
            for d in -r..=r {
                let src = &m[y * w + clamp(x as isize + d, w)];
                for k in 0..5 {
                    s[k] += src[k];
                }
            }
            tmp[y * w + x] = s;
        }
    }
    let mut out = vec![[T::zero(); 5]; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut s = [T::zero(); 5];
            for d in -r..=r {
                let src = &tmp[clamp(y as isize + d, h) * w + x];
                for k in 0..5 {
                    s[k] += src[k];
                }
            }
            out[y * w + x] = s;
        }
    }
    out
}
