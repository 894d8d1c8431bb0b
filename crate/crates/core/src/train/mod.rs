//! Quantization-aware training with straight-through gradients, the BCE
//! objective, and threshold calibration from observed activations.

mod graph;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Image, LabeledFrame};
use crate::denoise::{ThresholdMode, ThresholdSpec};
use crate::error::{Error, Result};
use crate::network::{Model, ModelSpec, ParamSet};
use crate::tensor::{decode, KernelWeight, Pow2Weight};
use graph::{Graph, Tape};

const BCE_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs_max: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub loss_stop: f64,
    pub seed: u64,
    /// Per denoisable layer; zero (or a missing entry) leaves that layer's
    /// threshold to explicit configuration.
    pub theta_quantile: Vec<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs_max: 50,
            batch_size: 64,
            learning_rate: 1e-3,
            loss_stop: 0.01,
            seed: 0,
            theta_quantile: Vec::new(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::contract("batch_size must be at least 1"));
        }
        if !(self.loss_stop > 0.0) {
            return Err(Error::contract(format!("loss_stop must be positive, got {}", self.loss_stop)));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::contract(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        check_quantiles(&self.theta_quantile)
    }
}

fn check_quantiles(q: &[f64]) -> Result<()> {
    match q.iter().find(|q| !(0.0..1.0).contains(*q)) {
        Some(bad) => Err(Error::contract(format!("quantiles must lie in [0, 1), got {bad}"))),
        None => Ok(()),
    }
}

/// Mean binary cross-entropy with scores clamped to `[1e-7, 1 - 1e-7]`.
pub fn bce_loss(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::contract(format!("{} scores but {} labels", scores.len(), labels.len())));
    }
    if scores.is_empty() {
        return Err(Error::contract("bce of an empty batch"));
    }
    let sum: f64 = scores.iter().zip(labels).map(|(&s, &y)| bce_term(s, y)).sum();
    Ok(sum / scores.len() as f64)
}

fn bce_term(score: f64, label: bool) -> f64 {
    let s = score.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
    if label {
        -s.ln()
    } else {
        -(1.0 - s).ln()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Shadow weights passed through the target weight type's quantizer;
/// biases stay real.
fn quantized_view<W: KernelWeight>(shadow: &ParamSet) -> ParamSet {
    let mut view = shadow.clone();
    for l in view.layers_mut() {
        for w in &mut l.weights {
            *w = W::quantize(*w).to_real();
        }
    }
    view
}

/// Mean BCE over `(frame, label)` pairs and its gradient w.r.t. `params`,
/// evaluated exactly at `params` (no quantization).
pub fn loss_and_gradient(
    spec: &ModelSpec,
    params: &ParamSet,
    frames: &[&[f64]],
    labels: &[bool],
) -> Result<(f64, ParamSet)> {
    let layout = spec.layout()?;
    params.check_layout(&layout)?;
    if frames.len() != labels.len() || frames.is_empty() {
        return Err(Error::contract("need one label per frame and at least one frame"));
    }
    let graph = Graph { layout: &layout, slope: spec.slope()?.value() };
    let pixels = spec.input_height * spec.input_width;
    let mut tape = Tape::default();
    let mut grad = params.zeros_like();
    let mut loss = 0.0;
    let scale = 1.0 / frames.len() as f64;
    for (frame, &y) in frames.iter().zip(labels) {
        if frame.len() != pixels {
            return Err(Error::contract(format!("frame has {} pixels, expected {pixels}", frame.len())));
        }
        let s = sigmoid(graph.forward(params, frame, &mut tape));
        loss += bce_term(s, y) * scale;
        let target = if y { 1.0 } else { 0.0 };
        graph.backward(params, &tape, (s - target) * scale, &mut grad);
    }
    Ok((loss, grad))
}

/// Straight-through gradient: loss and gradient evaluated on the
/// `W`-quantized view of `shadow`, to be applied to `shadow` unchanged.
pub fn ste_loss_and_gradient<W: KernelWeight>(
    spec: &ModelSpec,
    shadow: &ParamSet,
    frames: &[&[f64]],
    labels: &[bool],
) -> Result<(f64, ParamSet)> {
    loss_and_gradient(spec, &quantized_view::<W>(shadow), frames, labels)
}

/// Outcome of a training run.
#[derive(Debug, Clone)]
pub struct TrainRun<W = Pow2Weight> {
    pub model: Model<W>,
    /// Epoch-mean BCE of every completed epoch.
    pub epoch_losses: Vec<f64>,
}

impl<W> TrainRun<W> {
    pub fn final_loss(&self) -> Option<f64> {
        self.epoch_losses.last().copied()
    }

    pub fn converged(&self, config: &TrainConfig) -> bool {
        self.final_loss().is_some_and(|l| l < config.loss_stop)
    }
}

/// Train a power-of-two model.
pub fn train(frames: &[LabeledFrame], config: &TrainConfig, spec: &ModelSpec) -> Result<Model> {
    Ok(train_run::<Pow2Weight>(frames, config, spec)?.model)
}

/// Train a model with weight type `W`. Every step runs the forward pass on
/// `W`-quantized shadow weights and applies the gradient to the shadow
/// weights unchanged; the model view is refreshed at each epoch end.
pub fn train_run<W: KernelWeight>(
    frames: &[LabeledFrame],
    config: &TrainConfig,
    spec: &ModelSpec,
) -> Result<TrainRun<W>> {
    config.validate()?;
    let layout = spec.layout()?;
    if config.theta_quantile.len() > layout.denoisable_layers() {
        return Err(Error::contract(format!(
            "{} theta quantiles for {} denoisable layers",
            config.theta_quantile.len(),
            layout.denoisable_layers()
        )));
    }
    match (frames.iter().any(|f| f.label.is_anomalous()), frames.iter().any(|f| !f.label.is_anomalous())) {
        (true, true) => {}
        (false, _) => return Err(Error::SingleClass("normal")),
        (_, false) => return Err(Error::SingleClass("anomalous")),
    }
    let inputs: Vec<Vec<f64>> = frames
        .iter()
        .map(|f| {
            if f.frame.width() != spec.input_width || f.frame.height() != spec.input_height {
                return Err(Error::contract(format!(
                    "training frame is {}x{}, model expects {}x{}",
                    f.frame.width(),
                    f.frame.height(),
                    spec.input_width,
                    spec.input_height
                )));
            }
            Ok(f.frame.data().iter().map(|&v| v as f64).collect())
        })
        .collect::<Result<_>>()?;
    let labels: Vec<bool> = frames.iter().map(|f| f.label.is_anomalous()).collect();

    let mut shadow = ParamSet::init(spec, config.seed)?;
    let mut model = Model::<W>::from_params(spec.clone(), &shadow)?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);
    let mut order: Vec<usize> = (0..frames.len()).collect();
    let mut epoch_losses = Vec::new();

    for _ in 0..config.epochs_max {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let xs: Vec<&[f64]> = batch.iter().map(|&i| inputs[i].as_slice()).collect();
            let ys: Vec<bool> = batch.iter().map(|&i| labels[i]).collect();
            let (loss, grad) = ste_loss_and_gradient::<W>(spec, &shadow, &xs, &ys)?;
            total += loss * batch.len() as f64;
            if config.learning_rate > 0.0 {
                for (p, g) in shadow.values_mut().zip(grad.values()) {
                    *p -= config.learning_rate * g;
                }
            }
        }
        model = Model::<W>::from_params(spec.clone(), &shadow)?;
        let mean = total / frames.len() as f64;
        epoch_losses.push(mean);
        if mean < config.loss_stop {
            break;
        }
    }

    if config.theta_quantile.iter().any(|&q| q > 0.0) {
        let normal: Vec<&Image<f32>> = frames.iter().filter(|f| !f.label.is_anomalous()).map(|f| &f.frame).collect();
        let calibrated = calibrate_theta(&model, &normal, &config.theta_quantile)?;
        let mut modes: Vec<ThresholdMode> =
            (0..layout.denoisable_layers()).map(|l| model.thresholds().mode(l)).collect();
        for (l, &q) in config.theta_quantile.iter().enumerate() {
            if q > 0.0 {
                modes[l] = calibrated.mode(l);
            }
        }
        model.set_thresholds(ThresholdSpec::per_layer(&modes)?)?;
    }
    Ok(TrainRun { model, epoch_losses })
}

/// Soft thresholds at the requested nearest-rank quantile of each layer's
/// absolute post-activation values, collected with denoising disabled.
/// Quantile zero leaves the layer undenoised.
pub fn calibrate_theta<W: KernelWeight>(
    model: &Model<W>,
    normal_frames: &[&Image<f32>],
    quantiles: &[f64],
) -> Result<ThresholdSpec> {
    check_quantiles(quantiles)?;
    if normal_frames.is_empty() {
        return Err(Error::contract("calibration needs at least one frame"));
    }
    let layers = model.layout().denoisable_layers();
    if quantiles.len() > layers {
        return Err(Error::contract(format!("{} quantiles for {layers} denoisable layers", quantiles.len())));
    }
    let fb = model.spec().frac_bits;
    let mut magnitudes: Vec<Vec<i64>> = vec![Vec::new(); quantiles.len()];
    for frame in normal_frames {
        let (_, trace) = model.infer_traced(frame, &ThresholdSpec::disabled())?;
        for (m, t) in magnitudes.iter_mut().zip(&trace) {
            m.extend(t.data().iter().map(|&v| (v as i64).abs()));
        }
    }
    let modes = quantiles
        .iter()
        .zip(&mut magnitudes)
        .map(|(&q, m)| {
            if q == 0.0 {
                return ThresholdMode::None;
            }
            m.sort_unstable();
            let rank = ((q * m.len() as f64).ceil() as usize).clamp(1, m.len());
            ThresholdMode::Soft { theta: decode(m[rank - 1].min(i32::MAX as i64) as i32, fb) }
        })
        .collect::<Vec<_>>();
    ThresholdSpec::per_layer(&modes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::ConvSpec;

    #[test]
    fn bce_examples() {
        assert!(bce_loss(&[1.0, 0.0], &[true, false]).unwrap() < 1e-6);
        let l = bce_loss(&[0.5; 4], &[true, false, true, false]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(bce_loss(&[0.5], &[]).is_err());
    }

    #[test]
    fn quantile_validation() {
        let cfg = TrainConfig { theta_quantile: vec![1.0], ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { loss_stop: 0.0, ..TrainConfig::default() }.validate().is_err());
    }

    fn tiny_spec() -> ModelSpec {
        ModelSpec {
            input_height: 8,
            input_width: 8,
            convs: vec![ConvSpec::new(2, 3, 2, 1)],
            hidden: vec![4],
            ..ModelSpec::default()
        }
    }

    #[test]
    fn conv_gradient_matches_finite_differences() {
        let spec = tiny_spec();
        let params = ParamSet::init(&spec, 3).unwrap();
        let frames: Vec<Vec<f64>> =
            (0..3).map(|k| (0..64).map(|i| ((i * 7 + k * 13) % 11) as f64 / 10.0).collect()).collect();
        let xs: Vec<&[f64]> = frames.iter().map(Vec::as_slice).collect();
        let ys = [true, false, true];
        let (_, grad) = loss_and_gradient(&spec, &params, &xs, &ys).unwrap();
        let h = 1e-6;
        let n = params.len();
        for idx in (0..n).step_by(5) {
            let mut plus = params.clone();
            *plus.values_mut().nth(idx).unwrap() += h;
            let mut minus = params.clone();
            *minus.values_mut().nth(idx).unwrap() -= h;
            let fd = (loss_and_gradient(&spec, &plus, &xs, &ys).unwrap().0
                - loss_and_gradient(&spec, &minus, &xs, &ys).unwrap().0)
                / (2.0 * h);
            let g = grad.values().nth(idx).unwrap();
            assert!((fd - g).abs() <= 1e-6 + 1e-4 * fd.abs(), "param {idx}: {fd} vs {g}");
        }
    }
}
