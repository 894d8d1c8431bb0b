//! Grayscale image files and atomic writes.

use std::io::Write;
use std::path::Path;

use super::Image;
use crate::error::{Error, Result};

/// Write to a sibling temp file, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path.file_name().ok_or_else(|| Error::contract(format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", file_name.to_string_lossy(), std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

/// Split a netpbm header into `count` whitespace-separated tokens,
/// skipping `#` comments. Returns the tokens and the payload offset.
fn netpbm_header(bytes: &[u8], count: usize) -> Result<(Vec<String>, usize)> {
    let mut tokens = Vec::with_capacity(count);
    let mut i = 0;
    while tokens.len() < count {
        while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'#') {
            if bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            } else {
                i += 1;
            }
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(Error::Truncated { offset: i, needed: 1 });
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    // exactly one whitespace byte separates header and payload
    if i >= bytes.len() {
        return Err(Error::Truncated { offset: i, needed: 1 });
    }
    Ok((tokens, i + 1))
}

fn parse_dim(tok: &str, what: &str) -> Result<usize> {
    tok.parse::<usize>().ok().filter(|&v| v > 0).ok_or_else(|| Error::Malformed(format!("bad {what} {tok:?}")))
}

/// Binary PGM (`P5`), 8 or 16 bit, scaled to `[0, 1]`.
pub fn read_pgm(path: &Path) -> Result<Image<f32>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes)
}

pub(crate) fn decode_pgm(bytes: &[u8]) -> Result<Image<f32>> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::Malformed("not a binary PGM (P5) file".into()));
    }
    let (tok, off) = netpbm_header(bytes, 4)?;
    let width = parse_dim(&tok[1], "width")?;
    let height = parse_dim(&tok[2], "height")?;
    let maxval = parse_dim(&tok[3], "maxval")?;
    if maxval > 65535 {
        return Err(Error::Malformed(format!("maxval {maxval} exceeds 65535")));
    }
    let bpp = if maxval < 256 { 1 } else { 2 };
    let need = width * height * bpp;
    let payload = &bytes[off..];
    if payload.len() < need {
        return Err(Error::Truncated { offset: bytes.len(), needed: need - payload.len() });
    }
    let scale = 1.0 / maxval as f32;
    let data = if bpp == 1 {
        payload[..need].iter().map(|&b| b as f32 * scale).collect()
    } else {
        payload[..need].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as f32 * scale).collect()
    };
    Image::from_vec(width, height, data)
}

/// 8-bit PGM with `value / max_value` mapped to `0..=255`.
pub fn write_pgm(path: &Path, img: &Image<f32>, max_value: f32) -> Result<()> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    let scale = if max_value > 0.0 { 255.0 / max_value } else { 0.0 };
    out.extend(img.data().iter().map(|&v| (v * scale).round().clamp(0.0, 255.0) as u8));
    write_atomic(path, &out)
}

/// Grayscale Portable Float Map (`Pf`), little-endian, rows bottom-up.
pub fn write_pfm(path: &Path, img: &Image<f32>) -> Result<()> {
    write_atomic(path, &encode_pfm(img))
}

pub(crate) fn encode_pfm(img: &Image<f32>) -> Vec<u8> {
    let mut out = format!("Pf\n{} {}\n-1.0\n", img.width(), img.height()).into_bytes();
    out.reserve(img.data().len() * 4);
    for row in img.data().chunks_exact(img.width()).rev() {
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn read_pfm(path: &Path) -> Result<Image<f32>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pfm(&bytes)
}

pub(crate) fn decode_pfm(bytes: &[u8]) -> Result<Image<f32>> {
    if bytes.len() < 2 || &bytes[..2] != b"Pf" {
        return Err(Error::Malformed("not a grayscale PFM (Pf) file".into()));
    }
    let (tok, off) = netpbm_header(bytes, 4)?;
    let width = parse_dim(&tok[1], "width")?;
    let height = parse_dim(&tok[2], "height")?;
    let scale: f64 = tok[3].parse().map_err(|_| Error::Malformed(format!("bad scale {:?}", tok[3])))?;
    let little = scale < 0.0;
    let need = width * height * 4;
    let payload = &bytes[off..];
    if payload.len() < need {
        return Err(Error::Truncated { offset: bytes.len(), needed: need - payload.len() });
    }
    let mut rows: Vec<f32> = payload[..need]
        .chunks_exact(4)
        .map(|c| {
            let b = [c[0], c[1], c[2], c[3]];
            if little {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            }
        })
        .collect();
    // stored bottom-up
    let mut data = Vec::with_capacity(rows.len());
    for row in rows.chunks_exact_mut(width).rev() {
        data.extend_from_slice(row);
    }
    Image::from_vec(width, height, data)
}
