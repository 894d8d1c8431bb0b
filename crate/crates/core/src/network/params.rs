use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Layout, ModelSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LayerParams {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Real-valued weights and biases for every layer, in the same layout as
/// [`super::Model`]: convolutions as `[C_out, C_in, K, K]`, dense layers as
/// `[outputs, inputs]`, head last.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    pub convs: Vec<LayerParams>,
    pub dense: Vec<LayerParams>,
}

impl ParamSet {
    /// Weights uniform in `±sqrt(6/fan_in)`, biases zero.
    pub fn init(spec: &ModelSpec, seed: u64) -> Result<Self> {
        let layout = spec.layout()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layer = |fan_in: usize, n_weights: usize, n_bias: usize| {
            let bound = (6.0 / fan_in as f64).sqrt();
            LayerParams {
                weights: (0..n_weights).map(|_| rng.gen_range(-bound..bound)).collect(),
                bias: vec![0.0; n_bias],
            }
        };
        let convs = layout
            .convs
            .iter()
            .map(|(g, _)| layer(g.in_channels * g.kernel * g.kernel, g.weight_count(), g.out_channels))
            .collect();
        let dense = layout.dense.iter().map(|&(i, o)| layer(i, i * o, o)).collect();
        Ok(Self { convs, dense })
    }

    pub fn zeros_like(&self) -> Self {
        let z = |l: &LayerParams| LayerParams { weights: vec![0.0; l.weights.len()], bias: vec![0.0; l.bias.len()] };
        Self { convs: self.convs.iter().map(z).collect(), dense: self.dense.iter().map(z).collect() }
    }

    pub fn len(&self) -> usize {
        self.layers().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn layers(&self) -> impl Iterator<Item = &LayerParams> {
        self.convs.iter().chain(&self.dense)
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut LayerParams> {
        self.convs.iter_mut().chain(&mut self.dense)
    }

    /// Visit every scalar in a fixed order (per layer: weights, then bias).
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers().flat_map(|l| l.weights.iter().chain(&l.bias).copied())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub(crate) fn check_layout(&self, layout: &Layout) -> Result<()> {
        let conv_ok = self.convs.len() == layout.convs.len()
            && self
                .convs
                .iter()
                .zip(&layout.convs)
                .all(|(p, (g, _))| p.weights.len() == g.weight_count() && p.bias.len() == g.out_channels);
        let dense_ok = self.dense.len() == layout.dense.len()
            && self.dense.iter().zip(&layout.dense).all(|(p, &(i, o))| p.weights.len() == i * o && p.bias.len() == o);
        if conv_ok && dense_ok {
            Ok(())
        } else {
            Err(Error::contract("parameter set does not match the model layout"))
        }
    }
}
