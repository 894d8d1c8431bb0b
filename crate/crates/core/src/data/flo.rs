//! Middlebury `.flo`: magic `PIEH` (202021.25 as f32), width and height as
//! i32, then interleaved `(u, v)` f32 pairs in row-major order. All
//! little-endian.

use std::path::Path;

use super::FlowField;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const FLO_MAGIC: [u8; 4] = *b"PIEH";

pub fn encode_flo<T: Real>(field: &FlowField<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * field.u().len());
    out.extend_from_slice(&FLO_MAGIC);
    out.extend_from_slice(&(field.width() as i32).to_le_bytes());
    out.extend_from_slice(&(field.height() as i32).to_le_bytes());
    for (u, v) in field.u().iter().zip(field.v()) {
        out.extend_from_slice(&u.to_f32().unwrap_or(f32::NAN).to_le_bytes());
        out.extend_from_slice(&v.to_f32().unwrap_or(f32::NAN).to_le_bytes());
    }
    out
}

pub fn decode_flo(bytes: &[u8]) -> Result<FlowField<f32>> {
    if bytes.len() < 4 {
        return Err(Error::Truncated { offset: bytes.len(), needed: 4 - bytes.len() });
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("length checked");
    if magic != FLO_MAGIC {
        return Err(Error::BadMagic { expected: FLO_MAGIC, found: magic });
    }
    if bytes.len() < 12 {
        return Err(Error::Truncated { offset: bytes.len(), needed: 12 - bytes.len() });
    }
    let word = |i: usize| i32::from_le_bytes(bytes[i..i + 4].try_into().expect("length checked"));
    let (w, h) = (word(4), word(8));
    if w <= 0 || h <= 0 {
        return Err(Error::Malformed(format!("invalid flow size {w}x{h}")));
    }
    let (w, h) = (w as usize, h as usize);
    let need = 12 + 8 * w * h;
    if bytes.len() < need {
        return Err(Error::Truncated { offset: bytes.len(), needed: need - bytes.len() });
    }
    if bytes.len() > need {
        return Err(Error::Malformed(format!("{} trailing bytes", bytes.len() - need)));
    }
    let mut u = Vec::with_capacity(w * h);
    let mut v = Vec::with_capacity(w * h);
    for pair in bytes[12..].chunks_exact(8) {
        u.push(f32::from_le_bytes(pair[..4].try_into().expect("8-byte chunk")));
        v.push(f32::from_le_bytes(pair[4..].try_into().expect("8-byte chunk")));
    }
    FlowField::new(w, h, u, v)
}

pub fn read_flo(path: &Path) -> Result<FlowField<f32>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_flo(&bytes)
}

pub fn write_flo<T: Real>(field: &FlowField<T>, path: &Path) -> Result<()> {
    super::write_atomic(path, &encode_flo(field))
}
