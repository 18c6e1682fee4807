//! Raw binary matrix layout shared by embedding and feature exports.
//!
//! A 16-byte header (`b"RESE"`, then little-endian `u32` rows, `u32` dim,
//! `u32` flags) is followed by `rows * dim` little-endian `f64` values in
//! row-major order.

use std::io::{Read, Write};

use crate::error::{AffinityError, Result};

pub const MAGIC: &[u8; 4] = b"RESE";

/// Set when the values come from a random sketch.
pub const FLAG_SKETCHED: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMatrix {
    pub rows: usize,
    pub dim: usize,
    pub flags: u32,
    pub data: Vec<f64>,
}

pub fn write_matrix<W: Write>(mut w: W, rows: usize, dim: usize, flags: u32, data: &[f64]) -> Result<()> {
    if data.len() != rows * dim {
        return Err(AffinityError::DimensionMismatch { expected: rows * dim, got: data.len() });
    }
    let to_u32 = |x: usize| u32::try_from(x).map_err(|_| AffinityError::Format(format!("{x} does not fit in u32")));
    let mut header = [0u8; 16];
    header[..4].copy_from_slice(MAGIC);
    header[4..8].copy_from_slice(&to_u32(rows)?.to_le_bytes());
    header[8..12].copy_from_slice(&to_u32(dim)?.to_le_bytes());
    header[12..16].copy_from_slice(&flags.to_le_bytes());
    w.write_all(&header)?;
    let mut buf = Vec::with_capacity(data.len() * 8);
    for x in data {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn read_matrix<R: Read>(mut r: R) -> Result<BinaryMatrix> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header).map_err(|_| AffinityError::Format("truncated header".into()))?;
    if &header[..4] != MAGIC {
        return Err(AffinityError::Format(format!("bad magic {:?}", &header[..4])));
    }
    let field = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
    let rows = field(4) as usize;
    let dim = field(8) as usize;
    let flags = field(12);
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != rows * dim * 8 {
        return Err(AffinityError::Format(format!("expected {} payload bytes, found {}", rows * dim * 8, bytes.len())));
    }
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(BinaryMatrix { rows, dim, flags, data })
}
