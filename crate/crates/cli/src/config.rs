//! TOML run configuration. Every section is optional; command-line flags
//! override individual keys.

use std::path::Path;

use anyhow::{bail, Context};
use p2ad::data::{FarnebackParams, NoiseParams, SynthParams, NOISE_LEVELS};
use p2ad::eval::{NetworkKind, SweepConfig};
use p2ad::network::ModelSpec;
use p2ad::train::TrainConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Weight representation trained by `train`.
    pub network: NetworkKind,
    pub data: DataConfig,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub flow: FarnebackParams,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub normal: usize,
    pub anomalous: usize,
    pub train_fraction: f64,
    pub synth: SynthParams,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { normal: 100, anomalous: 100, train_fraction: 0.5, synth: SynthParams::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Threshold rows as `none` or `mode:theta1:theta2`.
    pub thresholds: Vec<String>,
    pub noise: Vec<usize>,
    pub noise_params: NoiseParams,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let mut thresholds = vec!["none".to_owned()];
        for mode in ["soft", "hard"] {
            for (t1, t2) in [(0.009, 0.01), (0.009, 0.03), (0.1, 0.01)] {
                thresholds.push(format!("{mode}:{t1}:{t2}"));
            }
        }
        Self { thresholds, noise: NOISE_LEVELS.to_vec(), noise_params: NoiseParams::default() }
    }
}

impl EvalConfig {
    pub fn sweep_configs(&self) -> anyhow::Result<Vec<SweepConfig>> {
        if self.thresholds.is_empty() {
            bail!("at least one threshold configuration is required");
        }
        self.thresholds.iter().map(|s| SweepConfig::parse(s).map_err(Into::into)).collect()
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            network: NetworkKind::Pow2,
            data: DataConfig::default(),
            model: ModelSpec::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            flow: FarnebackParams::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        let c: RunConfig = toml::from_str("").unwrap();
        assert_eq!(c.data.normal, 100);
        assert_eq!(c.train, TrainConfig::default());
        assert_eq!(c.network, NetworkKind::Pow2);
        assert_eq!(c.eval.sweep_configs().unwrap().len(), 7);
    }

    #[test]
    fn sections_parse() {
        let c: RunConfig = toml::from_str(
            r#"
            seed = 4
            network = "regular"
            [data]
            normal = 3
            [data.synth]
            width = 32
            height = 32
            [model]
            input_height = 32
            input_width = 32
            [train]
            learning_rate = 0.05
            theta_quantile = [0.5]
            [eval]
            thresholds = ["none", "soft:0.1:none"]
            noise = [0]
            [flow]
            window = 9
            "#,
        )
        .unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.data.synth.width, 32);
        assert_eq!(c.network, NetworkKind::Regular);
        assert_eq!(c.train.learning_rate, 0.05);
        assert_eq!(c.train.batch_size, 64);
        assert_eq!(c.flow.window, 9);
        assert_eq!(c.eval.sweep_configs().unwrap().len(), 2);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("[data]\nnormals = 3\n").is_err());
        assert!(toml::from_str::<RunConfig>("[train]\nrate = 3\n").is_err());
        assert!(toml::from_str::<RunConfig>("[data.synth]\nwdth = 3\n").is_err());
    }
}
