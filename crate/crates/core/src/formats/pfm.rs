//! Single-channel Portable Float Map (`Pf`).
//!
//! Rows are stored bottom-up. A negative scale token means little-endian
//! samples, a positive one big-endian. The writer always emits the canonical
//! little-endian form `Pf\n<w> <h>\n-1.0\n`.

use super::FloatMap;
use crate::error::{Error, Result};

pub fn read_pfm(bytes: &[u8]) -> Result<FloatMap> {
    let mut pos = 0;
    let magic = next_token(bytes, &mut pos)?;
    if magic != "Pf" {
        return Err(Error::MalformedHeader(format!(
            "expected magic \"Pf\", found {magic:?}"
        )));
    }
    let width = parse_dim(next_token(bytes, &mut pos)?)?;
    let height = parse_dim(next_token(bytes, &mut pos)?)?;
    let scale_tok = next_token(bytes, &mut pos)?;
    let scale: f64 = scale_tok
        .parse()
        .map_err(|_| Error::MalformedHeader(format!("bad scale token {scale_tok:?}")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::MalformedHeader(format!("bad scale token {scale_tok:?}")));
    }
    // exactly one whitespace byte separates the header from the payload
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::MalformedHeader("missing payload separator".into())),
    }

    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::MalformedHeader("dimensions overflow".into()))?;
    let expected = n * 4;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }

    let little = scale < 0.0;
    let mut data = vec![0f32; n];
    for (file_row, chunk) in payload[..expected].chunks_exact(width * 4).enumerate() {
        let y = height - 1 - file_row;
        let out = &mut data[y * width..(y + 1) * width];
        for (v, b) in out.iter_mut().zip(chunk.chunks_exact(4)) {
            let raw = [b[0], b[1], b[2], b[3]];
            *v = if little {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
        }
    }
    FloatMap::from_samples(width, height, data)
}

/// Canonical little-endian encoding.
///
/// Invalid pixels are written as their stored sample when that is already
/// non-finite, and as `+inf` otherwise.
pub fn write_pfm(map: &FloatMap) -> Vec<u8> {
    let (w, h) = map.dims();
    let header = format!("Pf\n{w} {h}\n-1.0\n");
    let mut out = Vec::with_capacity(header.len() + w * h * 4);
    out.extend_from_slice(header.as_bytes());
    for y in (0..h).rev() {
        for x in 0..w {
            let i = y * w + x;
            let v = map.data()[i];
            let v = if map.valid()[i] || !v.is_finite() {
                v
            } else {
                f32::INFINITY
            };
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::MalformedHeader("unexpected end of header".into()));
    }
    std::str::from_utf8(&bytes[start..*pos]).map_err(|_| Error::MalformedHeader("header is not ASCII".into()))
}

fn parse_dim(tok: &str) -> Result<usize> {
    match tok.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(Error::MalformedHeader(format!("bad dimension {tok:?}"))),
    }
}
