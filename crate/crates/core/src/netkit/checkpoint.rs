//! Binary checkpoint format (little-endian):
//!
//! ```text
//! "FPKT"                      magic
//! u32                         format version
//! u64                         header length
//! header                      canonical JSON {"spec": NetworkSpec, "meta": CheckpointMeta}
//! repeated until EOF:
//!   u32                       block name length
//!   name bytes                UTF-8
//!   u64                       value count
//!   count x f32               parameter values
//!   u64                       digest64 of the f32 payload bytes
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::Network;
use crate::attrclass::AttributeScheme;
use super::spec::NetworkSpec;
use super::train::TrainConfig;
use crate::checksum::digest64;
use crate::error::{CheckpointError, Error, Result};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"FPKT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub model_id: String,
    pub config: Option<TrainConfig>,
    pub epoch: usize,
    pub seed: u64,
    /// Label set of an attribute model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<AttributeScheme>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    spec: NetworkSpec,
    meta: CheckpointMeta,
}

pub fn encode_checkpoint<T: Scalar>(net: &Network<T>, meta: &CheckpointMeta) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&Header {
        spec: net.spec().clone(),
        meta: meta.clone(),
    })
    .map_err(|e| Error::Config(format!("cannot serialize checkpoint header: {e}")))?;
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for (name, block) in net.block_names().iter().zip(net.blocks()) {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(block.len() as u64).to_le_bytes());
        let payload: Vec<u8> = block
            .data()
            .iter()
            .flat_map(|v| (v.as_f64() as f32).to_le_bytes())
            .collect();
        out.extend_from_slice(&payload);
        out.extend_from_slice(&digest64(&payload).to_le_bytes());
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CheckpointError> {
        if self.bytes.len() - self.pos < n {
            return Err(CheckpointError::Truncated(what.to_string()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

/// Decodes a checkpoint. When `expected` is given, the stored spec must equal it.
pub fn decode_checkpoint(bytes: &[u8], expected: Option<&NetworkSpec>) -> Result<(Network<f64>, CheckpointMeta)> {
    let mut r = Reader { bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4, "magic")?.try_into().unwrap();
    if &magic != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic(magic).into());
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::UnsupportedVersion {
            found: version,
            expected: CHECKPOINT_VERSION,
        }
        .into());
    }
    let header_len = r.u64("header length")? as usize;
    let header: Header = serde_json::from_slice(r.take(header_len, "header")?)
        .map_err(|e| CheckpointError::Malformed(format!("header: {e}")))?;

    if let Some(exp) = expected {
        if exp.class_count != header.spec.class_count {
            return Err(CheckpointError::Incompatible(format!(
                "checkpoint has {} classes, expected {}",
                header.spec.class_count, exp.class_count
            ))
            .into());
        }
        if exp.resolve_padding()? != header.spec {
            return Err(CheckpointError::Incompatible("network layout differs from the expected spec".into()).into());
        }
    }

    let mut net = Network::<f64>::zeros(&header.spec)
        .map_err(|e| CheckpointError::Malformed(format!("stored spec is invalid: {e}")))?;
    let names = net.block_names();
    let mut blocks = net.blocks_mut();
    for (i, name) in names.iter().enumerate() {
        if r.done() {
            return Err(CheckpointError::Truncated(format!("parameter block `{name}` (missing)")).into());
        }
        let name_len = r.u32("block name length")? as usize;
        let stored = std::str::from_utf8(r.take(name_len, "block name")?)
            .map_err(|_| CheckpointError::Malformed("block name is not UTF-8".into()))?;
        if stored != name {
            return Err(CheckpointError::Incompatible(format!("expected block `{name}`, found `{stored}`")).into());
        }
        let count = r.u64("block length")? as usize;
        if count != blocks[i].len() {
            return Err(CheckpointError::Incompatible(format!(
                "block `{name}` holds {count} values, spec needs {}",
                blocks[i].len()
            ))
            .into());
        }
        let payload = r.take(count * 4, &format!("block `{name}` values"))?;
        let checksum = r.u64(&format!("block `{name}` checksum"))?;
        if digest64(payload) != checksum {
            return Err(CheckpointError::ChecksumMismatch(name.clone()).into());
        }
        for (dst, chunk) in blocks[i].data_mut().iter_mut().zip(payload.chunks_exact(4)) {
            *dst = f32::from_le_bytes(chunk.try_into().unwrap()) as f64;
        }
    }
    if !r.done() {
        return Err(CheckpointError::Malformed("trailing bytes after the last parameter block".into()).into());
    }
    Ok((net, header.meta))
}

/// Writes atomically: the bytes go to a sibling temp file that is then renamed.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", file_name.to_string_lossy(), std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn save_checkpoint<T: Scalar>(net: &Network<T>, meta: &CheckpointMeta, path: &Path) -> Result<()> {
    write_atomic(path, &encode_checkpoint(net, meta)?)
}

pub fn load_checkpoint(path: &Path, expected: Option<&NetworkSpec>) -> Result<(Network<f64>, CheckpointMeta)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, expected)
}
