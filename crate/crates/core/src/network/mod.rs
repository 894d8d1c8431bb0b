//! Discriminator-style CNN: strided convolutions with LeakyReLU, two dense
//! hidden layers and a scalar logistic head, run entirely in shift-only
//! fixed-point arithmetic up to the final sigmoid.

mod format;
mod params;

pub use format::{peek_weight_kind, StoredWeight, FORMAT_VERSION, MAGIC};
pub use params::ParamSet;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Image;
use crate::denoise::{apply_denoising, ThresholdMode, ThresholdSpec};
use crate::error::{Error, Result};
use crate::tensor::{
    conv2d, fully_connected, leaky_relu, sigmoid_score, to_fixed, Conv2dGeometry, FixedWeight, KernelWeight,
    LeakySlope, OpCounter, Pow2Weight, QTensor, DEFAULT_FRAC_BITS, MAX_FRAC_BITS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConvSpec {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvSpec {
    pub const fn new(out_channels: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        Self { out_channels, kernel, stride, padding }
    }
}

/// Architecture plus inference configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub input_height: usize,
    pub input_width: usize,
    pub convs: Vec<ConvSpec>,
    /// Widths of the dense hidden layers. The scalar head is implicit.
    pub hidden: Vec<usize>,
    /// LeakyReLU negative slope is `2^-leaky_shift`.
    pub leaky_shift: u8,
    pub frac_bits: u32,
    pub thresholds: ThresholdSpec,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            input_height: 64,
            input_width: 64,
            convs: vec![ConvSpec::new(8, 4, 2, 1), ConvSpec::new(16, 4, 2, 1), ConvSpec::new(32, 4, 2, 1)],
            hidden: vec![128, 32],
            leaky_shift: 3,
            frac_bits: DEFAULT_FRAC_BITS,
            thresholds: ThresholdSpec::disabled(),
        }
    }
}

/// Resolved shapes of every layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    /// Convolution geometry with its input `(height, width)`.
    pub convs: Vec<(Conv2dGeometry, (usize, usize))>,
    /// `(inputs, outputs)` of each dense layer; the last is the head.
    pub dense: Vec<(usize, usize)>,
}

impl Layout {
    pub fn parameter_count(&self) -> usize {
        let conv: usize = self.convs.iter().map(|(g, _)| g.weight_count() + g.out_channels).sum();
        let dense: usize = self.dense.iter().map(|&(i, o)| i * o + o).sum();
        conv + dense
    }

    /// Layers whose outputs pass through LeakyReLU and may be denoised:
    /// every convolution and every hidden dense layer.
    pub fn denoisable_layers(&self) -> usize {
        self.convs.len() + self.dense.len() - 1
    }

    pub fn dense_ops(&self) -> u64 {
        let conv: u64 = self.convs.iter().map(|(g, (h, w))| g.dense_ops(*h, *w).expect("layout validated")).sum();
        conv + self.dense.iter().map(|&(i, o)| (i * o) as u64).sum::<u64>()
    }
}

impl ModelSpec {
    pub fn slope(&self) -> Result<LeakySlope> {
        LeakySlope::from_shift(self.leaky_shift)
    }

    pub fn layout(&self) -> Result<Layout> {
        if self.input_height == 0 || self.input_width == 0 {
            return Err(Error::contract("input size must be positive"));
        }
        if self.frac_bits > MAX_FRAC_BITS {
            return Err(Error::contract(format!("frac_bits {} exceeds {MAX_FRAC_BITS}", self.frac_bits)));
        }
        self.slope()?;
        let (mut h, mut w, mut c) = (self.input_height, self.input_width, 1usize);
        let mut convs = Vec::with_capacity(self.convs.len());
        for (i, cs) in self.convs.iter().enumerate() {
            if cs.out_channels == 0 || cs.kernel == 0 || cs.stride == 0 {
                return Err(Error::contract(format!("conv layer {i}: channels, kernel and stride must be positive")));
            }
            let geom = Conv2dGeometry {
                in_channels: c,
                out_channels: cs.out_channels,
                kernel: cs.kernel,
                stride: cs.stride,
                padding: cs.padding,
            };
            let (ho, wo) = geom.output_size(h, w).ok_or_else(|| {
                Error::contract(format!(
                    "conv layer {i}: kernel {} (padding {}) larger than its {h}x{w} input",
                    cs.kernel, cs.padding
                ))
            })?;
            convs.push((geom, (h, w)));
            (h, w, c) = (ho, wo, cs.out_channels);
        }
        let mut n = c * h * w;
        let mut dense = Vec::with_capacity(self.hidden.len() + 1);
        for (i, &width) in self.hidden.iter().enumerate() {
            if width == 0 {
                return Err(Error::contract(format!("hidden layer {i} has zero width")));
            }
            dense.push((n, width));
            n = width;
        }
        dense.push((n, 1));
        let layout = Layout { convs, dense };
        self.thresholds.check_layers(layout.denoisable_layers())?;
        Ok(layout)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<W> {
    pub geometry: Conv2dGeometry,
    pub weights: Vec<W>,
    pub bias: Vec<i32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<W> {
    pub inputs: usize,
    pub outputs: usize,
    /// `[outputs, inputs]` row-major.
    pub weights: Vec<W>,
    pub bias: Vec<i32>,
}

/// Outcome of scoring one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    /// Anomaly probability, strictly inside `(0, 1)`.
    pub score: f64,
    /// Decoded head output before the sigmoid. Ranks frames without the
    /// saturation the sigmoid has in double precision.
    pub logit: f64,
    /// All layers.
    pub counter: OpCounter,
    /// One entry per weighted layer, head last.
    pub layer_counters: Vec<OpCounter>,
    /// Zero fraction of each denoisable layer's output after denoising.
    pub per_layer_zero_fraction: Vec<f64>,
}

/// Shift-only network; generic over the weight representation so the
/// unconstrained baseline runs through the same kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<W = Pow2Weight> {
    spec: ModelSpec,
    layout: Layout,
    convs: Vec<ConvLayer<W>>,
    dense: Vec<DenseLayer<W>>,
}

/// Baseline with unconstrained Q16 weights (uses multiplies).
pub type RegularModel = Model<FixedWeight>;

/// Default-shaped power-of-two model with seeded random weights.
pub fn build_model(spec: ModelSpec, seed: u64) -> Result<Model> {
    Model::build(spec, seed)
}

impl<W: KernelWeight> Model<W> {
    /// Fan-in scaled uniform initialization, then quantized.
    pub fn build(spec: ModelSpec, seed: u64) -> Result<Self> {
        let params = ParamSet::init(&spec, seed)?;
        Self::from_params(spec, &params)
    }

    /// Quantize a real-valued parameter set into this model's weight type.
    pub fn from_params(spec: ModelSpec, params: &ParamSet) -> Result<Self> {
        let layout = spec.layout()?;
        params.check_layout(&layout)?;
        let fb = spec.frac_bits;
        let bias = |b: &[f64]| b.iter().map(|&v| crate::tensor::encode(v, fb)).collect::<Vec<_>>();
        let convs = layout
            .convs
            .iter()
            .zip(&params.convs)
            .map(|((geometry, _), p)| ConvLayer {
                geometry: *geometry,
                weights: p.weights.iter().map(|&w| W::quantize(w)).collect(),
                bias: bias(&p.bias),
            })
            .collect();
        let dense = layout
            .dense
            .iter()
            .zip(&params.dense)
            .map(|(&(inputs, outputs), p)| DenseLayer {
                inputs,
                outputs,
                weights: p.weights.iter().map(|&w| W::quantize(w)).collect(),
                bias: bias(&p.bias),
            })
            .collect();
        Ok(Self { spec, layout, convs, dense })
    }

    pub(crate) fn from_parts(spec: ModelSpec, convs: Vec<ConvLayer<W>>, dense: Vec<DenseLayer<W>>) -> Result<Self> {
        let layout = spec.layout()?;
        let conv_ok = convs.len() == layout.convs.len()
            && convs.iter().zip(&layout.convs).all(|(l, (g, _))| {
                l.geometry == *g && l.weights.len() == g.weight_count() && l.bias.len() == g.out_channels
            });
        let dense_ok = dense.len() == layout.dense.len()
            && dense
                .iter()
                .zip(&layout.dense)
                .all(|(l, &(i, o))| l.inputs == i && l.outputs == o && l.weights.len() == i * o && l.bias.len() == o);
        if !conv_ok || !dense_ok {
            return Err(Error::contract("layer tensors do not match the model spec"));
        }
        Ok(Self { spec, layout, convs, dense })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn conv_layers(&self) -> &[ConvLayer<W>] {
        &self.convs
    }

    /// Hidden layers followed by the head.
    pub fn dense_layers(&self) -> &[DenseLayer<W>] {
        &self.dense
    }

    pub fn thresholds(&self) -> &ThresholdSpec {
        &self.spec.thresholds
    }

    pub fn set_thresholds(&mut self, thresholds: ThresholdSpec) -> Result<()> {
        thresholds.check_layers(self.layout.denoisable_layers())?;
        self.spec.thresholds = thresholds;
        Ok(())
    }

    pub fn with_thresholds(mut self, thresholds: ThresholdSpec) -> Result<Self> {
        self.set_thresholds(thresholds)?;
        Ok(self)
    }

    /// Decoded weights and biases, the inverse of [`Model::from_params`]
    /// up to quantization.
    pub fn to_params(&self) -> ParamSet {
        let fb = self.spec.frac_bits;
        let bias = |b: &[i32]| b.iter().map(|&q| crate::tensor::decode(q, fb)).collect();
        ParamSet {
            convs: self
                .convs
                .iter()
                .map(|l| params::LayerParams {
                    weights: l.weights.iter().map(|w| w.to_real()).collect(),
                    bias: bias(&l.bias),
                })
                .collect(),
            dense: self
                .dense
                .iter()
                .map(|l| params::LayerParams {
                    weights: l.weights.iter().map(|w| w.to_real()).collect(),
                    bias: bias(&l.bias),
                })
                .collect(),
        }
    }

    /// Score one frame with the model's own thresholds.
    pub fn infer(&self, frame: &Image<f32>) -> Result<InferenceResult> {
        self.infer_with(frame, &self.spec.thresholds)
    }

    /// Score one frame with an overriding threshold configuration.
    pub fn infer_with(&self, frame: &Image<f32>, thresholds: &ThresholdSpec) -> Result<InferenceResult> {
        self.run(frame, thresholds, None)
    }

    /// Like [`Model::infer_with`], also returning every denoisable layer's
    /// post-activation output before denoising.
    pub fn infer_traced(
        &self,
        frame: &Image<f32>,
        thresholds: &ThresholdSpec,
    ) -> Result<(InferenceResult, Vec<QTensor>)> {
        let mut trace = Vec::with_capacity(self.layout.denoisable_layers());
        let result = self.run(frame, thresholds, Some(&mut trace))?;
        Ok((result, trace))
    }

    fn run(
        &self,
        frame: &Image<f32>,
        thresholds: &ThresholdSpec,
        mut trace: Option<&mut Vec<QTensor>>,
    ) -> Result<InferenceResult> {
        if frame.width() != self.spec.input_width || frame.height() != self.spec.input_height {
            return Err(Error::contract(format!(
                "frame is {}x{} but the model expects {}x{}",
                frame.width(),
                frame.height(),
                self.spec.input_width,
                self.spec.input_height
            )));
        }
        if let Some(v) = frame.data().iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::contract(format!("flow magnitudes must be finite and non-negative, found {v}")));
        }
        thresholds.check_layers(self.layout.denoisable_layers())?;
        let slope = self.spec.slope()?;
        let fb = self.spec.frac_bits;

        let mut x = to_fixed(frame.data(), vec![1, frame.height(), frame.width()], fb)?;
        let mut layer_counters = Vec::with_capacity(self.convs.len() + self.dense.len());
        let mut zero_fraction = Vec::with_capacity(self.layout.denoisable_layers());

        let mut post_activation = |x: QTensor, layer: usize| -> Result<QTensor> {
            let y = leaky_relu(&x, slope);
            let mode = thresholds.mode(layer);
            let z = if mode == ThresholdMode::None { y.clone() } else { apply_denoising(&y, &mode)? };
            if let Some(t) = trace.as_deref_mut() {
                t.push(y);
            }
            zero_fraction.push(z.zero_fraction());
            Ok(z)
        };

        for (i, layer) in self.convs.iter().enumerate() {
            let mut c = OpCounter::default();
            let y = conv2d(&x, &layer.weights, &layer.bias, &layer.geometry, &mut c)?;
            layer_counters.push(c);
            x = post_activation(y, i)?;
        }
        let n_conv = self.convs.len();
        let n = x.len();
        x = x.reshape(vec![n])?;
        let (head, hidden) = self.dense.split_last().expect("model always has a head");
        for (j, layer) in hidden.iter().enumerate() {
            let mut c = OpCounter::default();
            let y = fully_connected(&x, &layer.weights, &layer.bias, &mut c)?;
            layer_counters.push(c);
            x = post_activation(y, n_conv + j)?;
        }
        let mut c = OpCounter::default();
        let out = fully_connected(&x, &head.weights, &head.bias, &mut c)?;
        layer_counters.push(c);

        let logit_q = out.data()[0];
        Ok(InferenceResult {
            score: sigmoid_score(logit_q, fb),
            logit: crate::tensor::decode(logit_q, fb),
            counter: layer_counters.iter().copied().sum(),
            layer_counters,
            per_layer_zero_fraction: zero_fraction,
        })
    }
}

impl<W: StoredWeight> Model<W> {
    pub fn to_bytes(&self) -> Vec<u8> {
        format::encode_model(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        format::decode_model(bytes)
    }

    /// Atomic write (temp file + rename).
    pub fn save(&self, path: &Path) -> Result<()> {
        crate::data::write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// A model file of either weight kind.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    Pow2(Model<Pow2Weight>),
    Regular(RegularModel),
}

impl AnyModel {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        match peek_weight_kind(bytes)? {
            Pow2Weight::KIND => Model::from_bytes(bytes).map(AnyModel::Pow2),
            FixedWeight::KIND => Model::from_bytes(bytes).map(AnyModel::Regular),
            other => Err(Error::Malformed(format!("unknown weight kind {other}"))),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        match self {
            AnyModel::Pow2(m) => m.save(path),
            AnyModel::Regular(m) => m.save(path),
        }
    }

    pub fn spec(&self) -> &ModelSpec {
        match self {
            AnyModel::Pow2(m) => m.spec(),
            AnyModel::Regular(m) => m.spec(),
        }
    }

    pub fn infer_with(&self, frame: &Image<f32>, thresholds: &ThresholdSpec) -> Result<InferenceResult> {
        match self {
            AnyModel::Pow2(m) => m.infer_with(frame, thresholds),
            AnyModel::Regular(m) => m.infer_with(frame, thresholds),
        }
    }
}

pub fn save_model<W: StoredWeight>(model: &Model<W>, path: &Path) -> Result<()> {
    model.save(path)
}

pub fn load_model<W: StoredWeight>(path: &Path) -> Result<Model<W>> {
    Model::load(path)
}
