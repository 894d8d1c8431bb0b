//! Background-motion noise: isotropic Gaussian bumps added at random
//! positions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Image;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Blob counts of the robustness sweep.
pub const NOISE_LEVELS: [usize; 4] = [0, 5, 10, 20];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseParams {
    /// Spatial variance σ² of each bump, in squared pixels.
    pub variance_px2: f64,
    /// Peak amplitude range, in flow-magnitude units.
    pub peak_range: (f64, f64),
}

impl Default for NoiseParams {
    fn default() -> Self {
        // 0.05–0.3 of the default 0.4 pedestrian maximum
        Self::relative_to(0.4, (0.05, 0.3))
    }
}

impl NoiseParams {
    /// Peaks as fractions of the largest normal magnitude.
    pub fn relative_to(max_normal: f64, fraction: (f64, f64)) -> Self {
        Self { variance_px2: 16.0, peak_range: (fraction.0 * max_normal, fraction.1 * max_normal) }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.peak_range;
        if !(self.variance_px2 > 0.0) || !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::contract(format!("invalid noise parameters {self:?}")));
        }
        Ok(())
    }
}

/// Add `peak · exp(−d² / 2σ²)` to `img`, truncated at 5σ.
pub fn render_gaussian<T: Real>(img: &mut Image<T>, cx: f64, cy: f64, variance: f64, peak: f64) {
    let reach = 5.0 * variance.sqrt();
    let x0 = (cx - reach).floor().max(0.0) as usize;
    let y0 = (cy - reach).floor().max(0.0) as usize;
    let x1 = ((cx + reach).ceil().max(0.0) as usize).min(img.width().saturating_sub(1));
    let y1 = ((cy + reach).ceil().max(0.0) as usize).min(img.height().saturating_sub(1));
    if img.width() == 0 || img.height() == 0 || x0 > x1 || y0 > y1 {
        return;
    }
    for y in y0..=y1 {
        for x in x0..=x1 {
            let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
            let v = peak * (-d2 / (2.0 * variance)).exp();
            let cur = img.get(x, y);
            img.set(x, y, cur + T::lit(v));
        }
    }
}

/// Add `blob_count` bumps at uniform random centres with peaks uniform in
/// `params.peak_range`. Draws are sequential, so two calls of 5 on one
/// stream equal one call of 10.
pub fn add_noise_blobs<T: Real>(
    img: &Image<T>,
    blob_count: usize,
    params: &NoiseParams,
    rng: &mut impl Rng,
) -> Result<Image<T>> {
    params.validate()?;
    let mut out = img.clone();
    if blob_count == 0 {
        return Ok(out);
    }
    let (w, h) = (img.width() as f64, img.height() as f64);
    for _ in 0..blob_count {
        let cx = rng.gen_range(0.0..w);
        let cy = rng.gen_range(0.0..h);
        let (lo, hi) = params.peak_range;
        let peak = if lo == hi { lo } else { rng.gen_range(lo..=hi) };
        render_gaussian(&mut out, cx, cy, params.variance_px2, peak);
    }
    for v in out.data_mut() {
        *v = v.max(T::zero());
    }
    Ok(out)
}
