//! `run_record.json`: everything needed to repeat a run. It holds no
//! timestamps or host details, so repeated runs write identical records.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use faceparse::checksum::digest64_hex;
use faceparse::dataio::DatasetManifest;
use faceparse::netkit::write_atomic;
use faceparse::profile::Profile;
use faceparse::{Error, Result};
use serde::Serialize;

use crate::args::Command;

pub const RECORD_FILE: &str = "run_record.json";
pub const RECORD_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub digest: String,
}

#[derive(Debug, Serialize)]
pub struct RunRecord<'a> {
    pub format_version: u32,
    pub tool_version: &'static str,
    pub seed: u64,
    pub invocation: &'a Command,
    pub profile: &'a Profile,
    /// Derived seeds by stream name.
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<FileDigest>,
    /// Paths relative to the output directory.
    pub outputs: Vec<FileDigest>,
}

impl<'a> RunRecord<'a> {
    pub fn new(seed: u64, invocation: &'a Command, profile: &'a Profile) -> Self {
        Self {
            format_version: RECORD_VERSION,
            tool_version: env!("CARGO_PKG_VERSION"),
            seed,
            invocation,
            profile,
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn seed(&mut self, stream: &str, value: u64) {
        self.seeds.insert(stream.to_string(), value);
    }

    pub fn input_file(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        self.inputs.push(FileDigest {
            path: path.to_path_buf(),
            digest: digest64_hex(&bytes),
        });
        Ok(())
    }

    /// The manifest file itself plus the recorded digest of every file it lists.
    pub fn input_manifest(&mut self, manifest: &DatasetManifest) -> Result<()> {
        self.input_file(&manifest.root.join(faceparse::dataio::MANIFEST_FILE))?;
        for e in &manifest.entries {
            self.inputs.push(FileDigest {
                path: manifest.image_path(e),
                digest: e.image_digest.clone(),
            });
            if let (Some(path), Some(digest)) = (manifest.mask_path(e), &e.mask_digest) {
                self.inputs.push(FileDigest {
                    path,
                    digest: digest.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn output_files(&mut self, out: &Path, paths: &[PathBuf]) -> Result<()> {
        for p in paths {
            let bytes = fs::read(p).map_err(|e| Error::io(p, e))?;
            self.outputs.push(FileDigest {
                path: p.strip_prefix(out).unwrap_or(p).to_path_buf(),
                digest: digest64_hex(&bytes),
            });
        }
        Ok(())
    }

    pub fn write(&mut self, out: &Path) -> Result<PathBuf> {
        self.inputs.sort();
        self.inputs.dedup();
        self.outputs.sort();
        let mut bytes = serde_json::to_vec_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        bytes.push(b'\n');
        let path = out.join(RECORD_FILE);
        write_atomic(&path, &bytes)?;
        Ok(path)
    }
}
