//! Binary float grids (weight-map cache, heat maps) and 16-bit PGM export.
//!
//! Grid layout: `u32 width`, `u32 height` (little endian), then `width * height`
//! little-endian `f64` values in row-major order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::weight::WeightMap;

pub fn encode_grid(width: usize, height: usize, values: &[f64]) -> Result<Vec<u8>> {
    if values.len() != width * height {
        return Err(Error::arg(format!(
            "grid has {} values, expected {width}x{height}",
            values.len()
        )));
    }
    let w = u32::try_from(width).map_err(|_| Error::arg("grid width exceeds u32"))?;
    let h = u32::try_from(height).map_err(|_| Error::arg("grid height exceeds u32"))?;
    let mut out = Vec::with_capacity(8 + 8 * values.len());
    out.extend_from_slice(&w.to_le_bytes());
    out.extend_from_slice(&h.to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_grid(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    if bytes.len() < 8 {
        return Err(Error::Schema("grid file shorter than its header".into()));
    }
    let width = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let expected = 8 + 8 * width * height;
    if bytes.len() != expected {
        return Err(Error::Schema(format!(
            "grid {width}x{height} needs {expected} bytes, file has {}",
            bytes.len()
        )));
    }
    let values = bytes[8..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((width, height, values))
}

pub fn save_weight_map(map: &WeightMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_grid(map.width(), map.height(), map.weights())?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_weight_map(path: impl AsRef<Path>) -> Result<WeightMap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (width, height, values) = decode_grid(&bytes)?;
    WeightMap::from_weights(width, height, values)
}

/// Writes a binary 16-bit PGM, scaling the maximum value to 65535.
pub fn encode_pgm16(width: usize, height: usize, values: &[f64]) -> Result<Vec<u8>> {
    if values.len() != width * height {
        return Err(Error::arg("PGM size mismatch"));
    }
    let max = values.iter().cloned().fold(0.0f64, f64::max);
    let scale = if max > 0.0 { 65535.0 / max } else { 0.0 };
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    for v in values {
        let q = (v.max(0.0) * scale).round().min(65535.0) as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    Ok(out)
}
