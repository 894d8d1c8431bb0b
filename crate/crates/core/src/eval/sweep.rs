use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::roc::roc_auc;
use crate::data::{add_noise_blobs, frame_rng, Image, LabeledFrame, NoiseParams};
use crate::denoise::{LayerThreshold, ThresholdMode, ThresholdSpec};
use crate::error::{Error, Result};
use crate::network::{AnyModel, InferenceResult, Model};
use crate::tensor::{FixedWeight, Pow2Weight};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkKind {
    Regular,
    Pow2,
}

impl fmt::Display for NetworkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NetworkKind::Regular => "regular",
            NetworkKind::Pow2 => "pow2",
        })
    }
}

/// Anything that can score a frame under a threshold override.
pub trait Scorer: Sync {
    fn kind(&self) -> NetworkKind;

    fn score(&self, frame: &Image<f32>, thresholds: &ThresholdSpec) -> Result<InferenceResult>;
}

impl Scorer for Model<Pow2Weight> {
    fn kind(&self) -> NetworkKind {
        NetworkKind::Pow2
    }

    fn score(&self, frame: &Image<f32>, thresholds: &ThresholdSpec) -> Result<InferenceResult> {
        self.infer_with(frame, thresholds)
    }
}

impl Scorer for Model<FixedWeight> {
    fn kind(&self) -> NetworkKind {
        NetworkKind::Regular
    }

    fn score(&self, frame: &Image<f32>, thresholds: &ThresholdSpec) -> Result<InferenceResult> {
        self.infer_with(frame, thresholds)
    }
}

impl Scorer for AnyModel {
    fn kind(&self) -> NetworkKind {
        match self {
            AnyModel::Pow2(_) => NetworkKind::Pow2,
            AnyModel::Regular(_) => NetworkKind::Regular,
        }
    }

    fn score(&self, frame: &Image<f32>, thresholds: &ThresholdSpec) -> Result<InferenceResult> {
        self.infer_with(frame, thresholds)
    }
}

/// Percentage of the dense operation count skipped because of denoising:
/// mean over frames of `(skipped − skipped_baseline) / dense_total`, where
/// the baseline is the same frame scored with denoising disabled.
pub fn attributable_savings_pct(results: &[InferenceResult], baseline: &[InferenceResult]) -> Result<f64> {
    if results.len() != baseline.len() || results.is_empty() {
        return Err(Error::contract("savings need matching, non-empty result sets"));
    }
    let total: f64 = results
        .iter()
        .zip(baseline)
        .map(|(r, b)| {
            let extra = r.counter.accumulates_skipped as f64 - b.counter.accumulates_skipped as f64;
            extra / r.counter.dense_total as f64
        })
        .sum();
    Ok(100.0 * total / results.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    None,
    Soft,
    Hard,
    L1ball,
}

impl fmt::Display for SweepMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepMode::None => "none",
            SweepMode::Soft => "soft",
            SweepMode::Hard => "hard",
            SweepMode::L1ball => "l1ball",
        })
    }
}

/// One threshold row of the sweep: a mode and per-layer parameters for the
/// first two convolution layers (θ, or ε for `l1ball`). A missing parameter
/// leaves that layer undenoised.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub mode: SweepMode,
    pub theta1: Option<f64>,
    pub theta2: Option<f64>,
}

impl SweepConfig {
    pub const NONE: SweepConfig = SweepConfig { mode: SweepMode::None, theta1: None, theta2: None };

    pub fn soft(theta1: Option<f64>, theta2: Option<f64>) -> Self {
        Self { mode: SweepMode::Soft, theta1, theta2 }
    }

    pub fn hard(theta1: Option<f64>, theta2: Option<f64>) -> Self {
        Self { mode: SweepMode::Hard, theta1, theta2 }
    }

    pub fn to_spec(&self) -> Result<ThresholdSpec> {
        let mode = |p: f64| match self.mode {
            SweepMode::None => ThresholdMode::None,
            SweepMode::Soft => ThresholdMode::Soft { theta: p },
            SweepMode::Hard => ThresholdMode::Hard { theta: p },
            SweepMode::L1ball => ThresholdMode::L1Ball { epsilon: p },
        };
        ThresholdSpec::new(
            [self.theta1, self.theta2]
                .iter()
                .enumerate()
                .filter_map(|(layer, p)| p.map(|p| LayerThreshold { layer, mode: mode(p) }))
                .filter(|e| e.mode != ThresholdMode::None)
                .collect(),
        )
    }

    /// Parse `none`, or `<mode>:<p1>:<p2>` where a parameter may be `none`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::contract(format!("bad threshold config {s:?}; want none or mode:p1:p2"));
        let parts: Vec<&str> = s.trim().split(':').collect();
        let param = |p: &str| -> Result<Option<f64>> {
            if p.eq_ignore_ascii_case("none") {
                Ok(None)
            } else {
                p.parse::<f64>().map(Some).map_err(|_| bad())
            }
        };
        let mode = match parts[0] {
            "none" => return if parts.len() == 1 { Ok(Self::NONE) } else { Err(bad()) },
            "soft" => SweepMode::Soft,
            "hard" => SweepMode::Hard,
            "l1ball" => SweepMode::L1ball,
            _ => return Err(bad()),
        };
        let cfg = match parts[1..] {
            [a] => Self { mode, theta1: param(a)?, theta2: None },
            [a, b] => Self { mode, theta1: param(a)?, theta2: param(b)? },
            _ => return Err(bad()),
        };
        cfg.to_spec()?;
        Ok(cfg)
    }
}

/// One `(network, thresholds, noise level)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub network: NetworkKind,
    pub mode: SweepMode,
    pub theta1: Option<f64>,
    pub theta2: Option<f64>,
    pub noise_blobs: usize,
    pub auc: f64,
    /// Skipped accumulates attributable to denoising, as a percentage of
    /// the dense count (mean over frames).
    pub savings_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    /// ROC points of each row, same order.
    pub roc: Vec<Vec<(f64, f64)>>,
}

fn noisy_frames(test: &[LabeledFrame], level: usize, noise: &NoiseParams, seed: u64) -> Result<Vec<Image<f32>>> {
    test.par_iter()
        .enumerate()
        .map(|(i, f)| {
            if level == 0 {
                Ok(f.frame.clone())
            } else {
                let mut rng = frame_rng(seed, ((level as u64) << 32) | i as u64);
                add_noise_blobs(&f.frame, level, noise, &mut rng)
            }
        })
        .collect()
}

fn score_all(net: &dyn Scorer, frames: &[Image<f32>], spec: &ThresholdSpec) -> Result<Vec<InferenceResult>> {
    frames.par_iter().map(|f| net.score(f, spec)).collect()
}

/// Evaluate every `(network, config, noise level)` combination.
///
/// Noise realizations depend only on `(seed, level, frame index)`, so all
/// networks and configs at one level see identical noisy frames. Savings
/// are measured against the same network with denoising disabled, hence
/// `none` rows report exactly zero.
pub fn sweep(
    networks: &[&dyn Scorer],
    test: &[LabeledFrame],
    configs: &[SweepConfig],
    noise_levels: &[usize],
    noise: &NoiseParams,
    seed: u64,
) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::contract("sweep needs a non-empty test set"));
    }
    let labels: Vec<bool> = test.iter().map(|f| f.label.is_anomalous()).collect();
    let specs = configs.iter().map(SweepConfig::to_spec).collect::<Result<Vec<_>>>()?;
    let levels = noise_levels
        .iter()
        .map(|&level| Ok((level, noisy_frames(test, level, noise, seed)?)))
        .collect::<Result<Vec<_>>>()?;

    let mut cells = std::collections::HashMap::new();
    for (ni, net) in networks.iter().enumerate() {
        for (level, frames) in &levels {
            let baseline = score_all(*net, frames, &ThresholdSpec::disabled())?;
            for (ci, spec) in specs.iter().enumerate() {
                let results = if spec.is_disabled() { baseline.clone() } else { score_all(*net, frames, spec)? };
                let logits: Vec<f64> = results.iter().map(|r| r.logit).collect();
                let roc = roc_auc(&logits, &labels)?;
                let savings = attributable_savings_pct(&results, &baseline)?;
                cells.insert((ni, ci, *level), (roc, savings));
            }
        }
    }

    let mut report = EvalReport::default();
    for (ni, net) in networks.iter().enumerate() {
        for (ci, cfg) in configs.iter().enumerate() {
            for &level in noise_levels {
                let (roc, savings_pct) = cells.remove(&(ni, ci, level)).expect("every cell evaluated");
                report.rows.push(EvalRow {
                    network: net.kind(),
                    mode: cfg.mode,
                    theta1: cfg.theta1,
                    theta2: cfg.theta2,
                    noise_blobs: level,
                    auc: roc.auc,
                    savings_pct,
                });
                report.roc.push(roc.points);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_configs() {
        assert_eq!(SweepConfig::parse("none").unwrap(), SweepConfig::NONE);
        assert_eq!(SweepConfig::parse("soft:0.009:0.01").unwrap(), SweepConfig::soft(Some(0.009), Some(0.01)));
        assert_eq!(SweepConfig::parse("hard:0.1:none").unwrap(), SweepConfig::hard(Some(0.1), None));
        assert_eq!(SweepConfig::parse("hard:0.1").unwrap(), SweepConfig::hard(Some(0.1), None));
        assert!(SweepConfig::parse("soft:-1:0").is_err());
        assert!(SweepConfig::parse("bogus:1:1").is_err());
        assert!(SweepConfig::parse("l1ball:0:1").is_err());
    }

    #[test]
    fn config_to_spec_targets_first_two_layers() {
        let s = SweepConfig::soft(Some(0.009), None).to_spec().unwrap();
        assert_eq!(s.mode(0), ThresholdMode::Soft { theta: 0.009 });
        assert_eq!(s.mode(1), ThresholdMode::None);
        assert!(SweepConfig::NONE.to_spec().unwrap().is_disabled());
    }
}
