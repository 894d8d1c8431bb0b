//! Binary model file, little-endian throughout.
//!
//! ```text
//! magic "P2AD" | version u16 | weight_kind u8 | frac_bits u8 | leaky_shift u8
//! input_height u16 | input_width u16
//! n_conv u16   { out_channels u16 | kernel u8 | stride u8 | padding u8 }*
//! n_hidden u16 { width u32 }*
//! per layer (convs, hidden, head):
//!     n_weights u32 | weight blob | n_bias u32 | bias i32*
//! n_thresholds u16 { layer u16 | mode u8 | value f64 }*
//! ```
//!
//! Power-of-two blobs hold `ceil(n/4)` bytes of 2-bit sign codes
//! (`00` zero, `01` +1, `10` −1, least significant pair first) followed by
//! `n` signed exponent bytes. Fixed-point blobs are `n` i32 words.

use crate::denoise::{LayerThreshold, ThresholdMode, ThresholdSpec};
use crate::error::{Error, Result};
use crate::tensor::{FixedWeight, KernelWeight, Pow2Weight};

use super::{ConvLayer, ConvSpec, DenseLayer, Model, ModelSpec};

pub const MAGIC: [u8; 4] = *b"P2AD";
pub const FORMAT_VERSION: u16 = 1;

/// Weight types with an on-disk encoding.
pub trait StoredWeight: KernelWeight {
    const KIND: u8;
    const NAME: &'static str;

    fn encode_blob(weights: &[Self], out: &mut Vec<u8>);

    fn decode_blob(r: &mut Reader<'_>, n: usize) -> Result<Vec<Self>>;
}

impl StoredWeight for Pow2Weight {
    const KIND: u8 = 0;
    const NAME: &'static str = "pow2";

    fn encode_blob(weights: &[Self], out: &mut Vec<u8>) {
        for chunk in weights.chunks(4) {
            let mut byte = 0u8;
            for (i, w) in chunk.iter().enumerate() {
                let code = match w.sign() {
                    0 => 0b00,
                    1 => 0b01,
                    _ => 0b10,
                };
                byte |= code << (2 * i);
            }
            out.push(byte);
        }
        out.extend(weights.iter().map(|w| w.exponent() as u8));
    }

    fn decode_blob(r: &mut Reader<'_>, n: usize) -> Result<Vec<Self>> {
        let signs = r.take(n.div_ceil(4))?;
        let exps = r.take(n)?;
        (0..n)
            .map(|i| {
                let sign = match (signs[i / 4] >> (2 * (i % 4))) & 0b11 {
                    0b00 => 0,
                    0b01 => 1,
                    0b10 => -1,
                    _ => return Err(Error::Malformed(format!("invalid sign code at weight {i}"))),
                };
                Pow2Weight::new(sign, exps[i] as i8).map_err(|e| Error::Malformed(format!("weight {i}: {e}")))
            })
            .collect()
    }
}

impl StoredWeight for FixedWeight {
    const KIND: u8 = 1;
    const NAME: &'static str = "fixed-q16";

    fn encode_blob(weights: &[Self], out: &mut Vec<u8>) {
        for w in weights {
            out.extend_from_slice(&w.0.to_le_bytes());
        }
    }

    fn decode_blob(r: &mut Reader<'_>, n: usize) -> Result<Vec<Self>> {
        (0..n).map(|_| r.i32().map(FixedWeight)).collect()
    }
}

pub struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let left = self.bytes.len() - self.pos;
        if n > left {
            return Err(Error::Truncated { offset: self.pos, needed: n - left });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        self.array().map(u16::from_le_bytes)
    }

    fn u32(&mut self) -> Result<u32> {
        self.array().map(u32::from_le_bytes)
    }

    fn i32(&mut self) -> Result<i32> {
        self.array().map(i32::from_le_bytes)
    }

    fn f64(&mut self) -> Result<f64> {
        self.array().map(f64::from_le_bytes)
    }
}

fn narrow<T: TryFrom<usize>>(v: usize, what: &str) -> T {
    T::try_from(v).unwrap_or_else(|_| panic!("{what} {v} does not fit the model format"))
}

fn encode_mode(mode: &ThresholdMode) -> (u8, f64) {
    match *mode {
        ThresholdMode::None => (0, 0.0),
        ThresholdMode::Soft { theta } => (1, theta),
        ThresholdMode::Hard { theta } => (2, theta),
        ThresholdMode::L1Ball { epsilon } => (3, epsilon),
    }
}

fn decode_mode(code: u8, value: f64) -> Result<ThresholdMode> {
    Ok(match code {
        0 => ThresholdMode::None,
        1 => ThresholdMode::Soft { theta: value },
        2 => ThresholdMode::Hard { theta: value },
        3 => ThresholdMode::L1Ball { epsilon: value },
        other => return Err(Error::Malformed(format!("unknown threshold mode {other}"))),
    })
}

pub(super) fn encode_model<W: StoredWeight>(model: &Model<W>) -> Vec<u8> {
    let spec = &model.spec;
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(W::KIND);
    out.push(narrow(spec.frac_bits as usize, "frac_bits"));
    out.push(spec.leaky_shift);
    out.extend_from_slice(&narrow::<u16>(spec.input_height, "input height").to_le_bytes());
    out.extend_from_slice(&narrow::<u16>(spec.input_width, "input width").to_le_bytes());
    out.extend_from_slice(&narrow::<u16>(spec.convs.len(), "conv count").to_le_bytes());
    for c in &spec.convs {
        out.extend_from_slice(&narrow::<u16>(c.out_channels, "channels").to_le_bytes());
        out.push(narrow(c.kernel, "kernel"));
        out.push(narrow(c.stride, "stride"));
        out.push(narrow(c.padding, "padding"));
    }
    out.extend_from_slice(&narrow::<u16>(spec.hidden.len(), "hidden count").to_le_bytes());
    for &h in &spec.hidden {
        out.extend_from_slice(&narrow::<u32>(h, "hidden width").to_le_bytes());
    }
    let blobs =
        model.convs.iter().map(|l| (&l.weights, &l.bias)).chain(model.dense.iter().map(|l| (&l.weights, &l.bias)));
    for (weights, bias) in blobs {
        out.extend_from_slice(&narrow::<u32>(weights.len(), "weight count").to_le_bytes());
        W::encode_blob(weights, &mut out);
        out.extend_from_slice(&narrow::<u32>(bias.len(), "bias count").to_le_bytes());
        for b in bias {
            out.extend_from_slice(&b.to_le_bytes());
        }
    }
    let entries = spec.thresholds.entries();
    out.extend_from_slice(&narrow::<u16>(entries.len(), "threshold count").to_le_bytes());
    for e in entries {
        let (code, value) = encode_mode(&e.mode);
        out.extend_from_slice(&narrow::<u16>(e.layer, "threshold layer").to_le_bytes());
        out.push(code);
        out.extend_from_slice(&value.to_le_bytes());
    }
    out
}

fn read_header(r: &mut Reader<'_>) -> Result<u8> {
    let magic: [u8; 4] = r.array()?;
    if magic != MAGIC {
        return Err(Error::BadMagic { expected: MAGIC, found: magic });
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion { found: version, supported: FORMAT_VERSION });
    }
    r.u8()
}

/// Weight kind byte of a model file, after checking magic and version.
pub fn peek_weight_kind(bytes: &[u8]) -> Result<u8> {
    read_header(&mut Reader::new(bytes))
}

pub(super) fn decode_model<W: StoredWeight>(bytes: &[u8]) -> Result<Model<W>> {
    let mut r = Reader::new(bytes);
    let kind = read_header(&mut r)?;
    if kind != W::KIND {
        return Err(Error::Malformed(format!("weight kind {kind} in file, expected {} ({})", W::KIND, W::NAME)));
    }
    let frac_bits = r.u8()? as u32;
    let leaky_shift = r.u8()?;
    let input_height = r.u16()? as usize;
    let input_width = r.u16()? as usize;
    let n_conv = r.u16()? as usize;
    let mut convs = Vec::with_capacity(n_conv);
    for _ in 0..n_conv {
        let out_channels = r.u16()? as usize;
        let (kernel, stride, padding) = (r.u8()? as usize, r.u8()? as usize, r.u8()? as usize);
        convs.push(ConvSpec { out_channels, kernel, stride, padding });
    }
    let n_hidden = r.u16()? as usize;
    let hidden = (0..n_hidden).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;

    let mut spec = ModelSpec {
        input_height,
        input_width,
        convs,
        hidden,
        leaky_shift,
        frac_bits,
        thresholds: ThresholdSpec::disabled(),
    };
    let layout = spec.layout().map_err(|e| Error::Malformed(e.to_string()))?;

    let mut blob = |expect_w: usize, expect_b: usize| -> Result<(Vec<W>, Vec<i32>)> {
        let n = r.u32()? as usize;
        if n != expect_w {
            return Err(Error::Malformed(format!("layer has {n} weights, layout needs {expect_w}")));
        }
        let weights = W::decode_blob(&mut r, n)?;
        let nb = r.u32()? as usize;
        if nb != expect_b {
            return Err(Error::Malformed(format!("layer has {nb} biases, layout needs {expect_b}")));
        }
        let bias = (0..nb).map(|_| r.i32()).collect::<Result<Vec<_>>>()?;
        Ok((weights, bias))
    };
    let mut conv_layers = Vec::with_capacity(layout.convs.len());
    for (g, _) in &layout.convs {
        let (weights, bias) = blob(g.weight_count(), g.out_channels)?;
        conv_layers.push(ConvLayer { geometry: *g, weights, bias });
    }
    let mut dense_layers = Vec::with_capacity(layout.dense.len());
    for &(inputs, outputs) in &layout.dense {
        let (weights, bias) = blob(inputs * outputs, outputs)?;
        dense_layers.push(DenseLayer { inputs, outputs, weights, bias });
    }

    let n_thr = r.u16()? as usize;
    let mut entries = Vec::with_capacity(n_thr);
    for _ in 0..n_thr {
        let layer = r.u16()? as usize;
        let code = r.u8()?;
        let value = r.f64()?;
        entries.push(LayerThreshold { layer, mode: decode_mode(code, value)? });
    }
    if r.pos != bytes.len() {
        return Err(Error::Malformed(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    spec.thresholds = ThresholdSpec::new(entries).map_err(|e| Error::Malformed(e.to_string()))?;
    Model::from_parts(spec, conv_layers, dense_layers).map_err(|e| Error::Malformed(e.to_string()))
}
