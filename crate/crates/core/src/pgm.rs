//! Binary portable graymap (P5, maxval 255) output.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Maps `v ∈ [0, 1]` to a gray level with round-half-up.
pub fn gray_level(v: f64) -> u8 {
    (255.0 * v.clamp(0.0, 1.0) + 0.5).floor() as u8
}

pub fn encode_pgm(rows: &[Vec<u8>]) -> Result<Vec<u8>> {
    let height = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    if height == 0 || width == 0 {
        return Err(Error::contract("cannot encode an empty image"));
    }
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::contract("image rows have unequal widths"));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    for r in rows {
        out.extend_from_slice(r);
    }
    Ok(out)
}

pub fn write_pgm(rows: &[Vec<u8>], path: &Path) -> Result<()> {
    let bytes = encode_pgm(rows)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Parses a P5 image written by [`encode_pgm`]; returns `(width, height, pixels)`.
pub fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let bad = |r: &str| Error::parse("PGM", r);
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1; // single whitespace byte after maxval
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(bad("not an 8-bit P5 image"));
    }
    let w: usize = fields[1].parse().map_err(|_| bad("width"))?;
    let h: usize = fields[2].parse().map_err(|_| bad("height"))?;
    let pixels = bytes.get(pos..).unwrap_or_default().to_vec();
    if pixels.len() != w * h {
        return Err(bad("pixel count does not match dimensions"));
    }
    Ok((w, h, pixels))
}
