use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training aborted at step {step}: {reason}")]
    Training { step: usize, reason: String },

    #[error("{stage} failed in fold {fold}: {source}")]
    Stage {
        stage: &'static str,
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),

    #[error(transparent)]
    Data(#[from] DataError),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic {0:?})")]
    BadMagic([u8; 4]),

    #[error("unsupported checkpoint version {found} (this build reads {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("checkpoint truncated while reading {0}")]
    Truncated(String),

    #[error("checksum mismatch in parameter block `{0}`")]
    ChecksumMismatch(String),

    #[error("checkpoint incompatible with network spec: {0}")]
    Incompatible(String),

    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{}: unsupported image format ({detail})", path.display())]
    UnsupportedFormat { path: PathBuf, detail: String },

    #[error("{}: cannot decode ({detail})", path.display())]
    Decode { path: PathBuf, detail: String },

    #[error("{}: mask value {value} at pixel ({x}, {y}) is not a class index 0-6", path.display())]
    MaskValue {
        path: PathBuf,
        x: usize,
        y: usize,
        value: u8,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("{}: digest mismatch (expected {expected}, found {found})", path.display())]
    DigestMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("{}: file not found", .0.display())]
    Missing(PathBuf),

    #[error("sidecar: {0}")]
    Sidecar(String),
}
