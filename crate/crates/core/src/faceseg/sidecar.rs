//! Lossless plane files (little-endian):
//!
//! ```text
//! "FPPM"        magic
//! u32           format version
//! u32 u32       width, height
//! n planes      width*height f64 values each, row-major
//! u64           digest64 of every preceding byte
//! ```
//!
//! The plane count is implied by the file length: 7 for probability maps,
//! 5 for feature vectors.

use crate::checksum::digest64;
use crate::error::{DataError, Result};

pub const SIDECAR_MAGIC: &[u8; 4] = b"FPPM";
pub const SIDECAR_VERSION: u32 = 1;

const HEADER_LEN: usize = 16;
const TRAILER_LEN: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct PlaneStack {
    pub width: usize,
    pub height: usize,
    pub planes: usize,
    pub data: Vec<f64>,
}

pub fn encode_planes(width: usize, height: usize, data: &[f64]) -> Result<Vec<u8>> {
    let area = width * height;
    if area == 0 || data.is_empty() || data.len() % area != 0 {
        return Err(DataError::Sidecar(format!("{} values do not form {width}x{height} planes", data.len())).into());
    }
    let w = u32::try_from(width).map_err(|_| DataError::Sidecar(format!("width {width} too large")))?;
    let h = u32::try_from(height).map_err(|_| DataError::Sidecar(format!("height {height} too large")))?;
    let mut out = Vec::with_capacity(HEADER_LEN + data.len() * 8 + TRAILER_LEN);
    out.extend_from_slice(SIDECAR_MAGIC);
    out.extend_from_slice(&SIDECAR_VERSION.to_le_bytes());
    out.extend_from_slice(&w.to_le_bytes());
    out.extend_from_slice(&h.to_le_bytes());
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let digest = digest64(&out);
    out.extend_from_slice(&digest.to_le_bytes());
    Ok(out)
}

pub fn decode_planes(bytes: &[u8]) -> Result<PlaneStack> {
    let bad = |msg: String| DataError::Sidecar(msg);
    if bytes.len() < HEADER_LEN + TRAILER_LEN {
        return Err(bad(format!("file of {} bytes is truncated", bytes.len())).into());
    }
    if &bytes[..4] != SIDECAR_MAGIC {
        return Err(bad("bad magic".into()).into());
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let version = word(4);
    if version != SIDECAR_VERSION {
        return Err(bad(format!("unsupported version {version}")).into());
    }
    let (width, height) = (word(8) as usize, word(12) as usize);
    let body = &bytes[HEADER_LEN..bytes.len() - TRAILER_LEN];
    let area = width * height;
    if area == 0 || body.len() % (8 * area) != 0 || body.is_empty() {
        return Err(bad(format!("{} payload bytes do not form {width}x{height} planes", body.len())).into());
    }
    let stored = u64::from_le_bytes(bytes[bytes.len() - TRAILER_LEN..].try_into().unwrap());
    if digest64(&bytes[..bytes.len() - TRAILER_LEN]) != stored {
        return Err(bad("checksum mismatch".into()).into());
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect::<Vec<_>>();
    Ok(PlaneStack {
        width,
        height,
        planes: data.len() / area,
        data,
    })
}
