//! Procedural flow-magnitude frames: slow pedestrian blobs, plus one fast
//! bright blob for anomalous frames, softened by a box blur.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{render_gaussian, Image, Label};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub width: usize,
    pub height: usize,
    /// Inclusive range of pedestrian blobs per frame.
    pub pedestrian_count: (usize, usize),
    /// Gaussian σ (pixels) of pedestrian blobs.
    pub pedestrian_sigma: (f64, f64),
    /// Peak flow magnitude of pedestrian blobs.
    pub pedestrian_peak: (f64, f64),
    pub anomaly_sigma: (f64, f64),
    pub anomaly_peak: (f64, f64),
    pub blur_radius: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            pedestrian_count: (2, 6),
            pedestrian_sigma: (1.5, 3.0),
            pedestrian_peak: (0.15, 0.4),
            anomaly_sigma: (3.0, 6.0),
            anomaly_peak: (0.6, 1.0),
            blur_radius: 1,
        }
    }
}

fn ordered(name: &str, (lo, hi): (f64, f64), positive: bool) -> Result<()> {
    let ok = lo.is_finite() && hi.is_finite() && lo <= hi && (if positive { lo > 0.0 } else { lo >= 0.0 });
    if ok {
        Ok(())
    } else {
        Err(Error::contract(format!("{name} range ({lo}, {hi}) is invalid")))
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::contract("synthetic frame size must be positive"));
        }
        if self.pedestrian_count.0 > self.pedestrian_count.1 {
            return Err(Error::contract("pedestrian_count range is inverted"));
        }
        ordered("pedestrian_sigma", self.pedestrian_sigma, true)?;
        ordered("pedestrian_peak", self.pedestrian_peak, false)?;
        ordered("anomaly_sigma", self.anomaly_sigma, true)?;
        ordered("anomaly_peak", self.anomaly_peak, false)?;
        if self.anomaly_peak.0 <= self.pedestrian_peak.1 {
            return Err(Error::contract(format!(
                "anomaly peak range must lie strictly above the pedestrian range (max {})",
                self.pedestrian_peak.1
            )));
        }
        let floor = self.anomaly_peak.0 * self.blur_retention(self.anomaly_sigma.0);
        if floor <= self.pedestrian_peak.1 {
            return Err(Error::contract(format!(
                "after a radius-{} blur the weakest anomaly peaks at {floor:.4}, \
                 not above the strongest pedestrian {}",
                self.blur_radius, self.pedestrian_peak.1
            )));
        }
        Ok(())
    }

    /// Peak value of a unit, pixel-centred Gaussian of width `sigma` after
    /// the configured blur.
    pub fn blur_retention(&self, sigma: f64) -> f64 {
        let r = self.blur_radius as i64;
        let s: f64 = (-r..=r)
            .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
            .map(|(dx, dy)| (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp())
            .sum();
        s / ((2 * r + 1) * (2 * r + 1)) as f64
    }
}

/// Deterministic per-frame stream: frame `index` of a run seeded `seed`.
pub fn frame_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn draw(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// One flow-magnitude frame. Blobs are combined by pointwise maximum so
/// overlapping pedestrians never look faster than any one of them.
pub fn synth_frame(params: &SynthParams, label: Label, rng: &mut impl Rng) -> Result<Image<f32>> {
    params.validate()?;
    let (w, h) = (params.width, params.height);
    let mut canvas = Image::<f64>::new(w, h);
    let stamp = |canvas: &mut Image<f64>, cx: f64, cy: f64, sigma: f64, peak: f64| {
        let mut blob = Image::<f64>::new(w, h);
        render_gaussian(&mut blob, cx, cy, sigma * sigma, peak);
        for (c, b) in canvas.data_mut().iter_mut().zip(blob.data()) {
            *c = c.max(*b);
        }
    };

    let n = rng.gen_range(params.pedestrian_count.0..=params.pedestrian_count.1);
    for _ in 0..n {
        let cx = rng.gen_range(0.0..w as f64);
        let cy = rng.gen_range(0.0..h as f64);
        let sigma = draw(rng, params.pedestrian_sigma);
        let peak = draw(rng, params.pedestrian_peak);
        stamp(&mut canvas, cx, cy, sigma, peak);
    }
    if label == Label::Anomalous {
        // pixel-centred so the sampled peak equals the drawn peak
        let cx = rng.gen_range(0..w) as f64;
        let cy = rng.gen_range(0..h) as f64;
        let sigma = draw(rng, params.anomaly_sigma);
        let peak = draw(rng, params.anomaly_peak);
        stamp(&mut canvas, cx, cy, sigma, peak);
    }
    Ok(canvas.box_blur(params.blur_radius).map(|v| v.max(0.0) as f32))
}
