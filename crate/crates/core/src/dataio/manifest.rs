use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::image_io::{load_image, load_mask};
use crate::attrclass::AttributeScheme;
use crate::checksum::digest64_hex;
use crate::error::{DataError, Error, Result};
use crate::faceseg::LabelMask;
use crate::netkit::write_atomic;
use crate::tensor::Tensor;

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    /// Relative to the manifest's directory.
    pub image: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub image_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_digest: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<AttributeScheme>,
    pub entries: Vec<ManifestEntry>,
    #[serde(skip)]
    pub root: PathBuf,
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::from(DataError::Missing(path.to_path_buf()))
        } else {
            Error::io(path, e)
        }
    })?;
    Ok(digest64_hex(&bytes))
}

impl DatasetManifest {
    pub fn new(root: impl Into<PathBuf>, scheme: Option<AttributeScheme>) -> Self {
        Self {
            format_version: MANIFEST_VERSION,
            scheme,
            entries: Vec::new(),
            root: root.into(),
        }
    }

    /// Adds an entry for files already under `root`, recording their digests.
    pub fn add(&mut self, id: &str, image: &Path, mask: Option<&Path>, label: Option<&str>) -> Result<()> {
        if self.entries.iter().any(|e| e.id == id) {
            return Err(DataError::Manifest(format!("duplicate image id `{id}`")).into());
        }
        let entry = ManifestEntry {
            id: id.to_string(),
            image: image.to_path_buf(),
            mask: mask.map(Path::to_path_buf),
            label: label.map(str::to_string),
            image_digest: file_digest(&self.root.join(image))?,
            mask_digest: mask.map(|m| file_digest(&self.root.join(m))).transpose()?,
        };
        self.entries.push(entry);
        Ok(())
    }

    pub fn entry(&self, id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn image_path(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.image)
    }

    pub fn mask_path(&self, entry: &ManifestEntry) -> Option<PathBuf> {
        entry.mask.as_ref().map(|m| self.root.join(m))
    }

    /// Re-reads the mask file of `id` and stores its new digest.
    pub fn set_mask(&mut self, id: &str, mask: &Path) -> Result<()> {
        let digest = file_digest(&self.root.join(mask))?;
        let entry = self
            .entries
            .iter_mut()
            .find(|e| e.id == id)
            .ok_or_else(|| DataError::Manifest(format!("no image with id `{id}`")))?;
        entry.mask = Some(mask.to_path_buf());
        entry.mask_digest = Some(digest);
        Ok(())
    }

    /// Checks ids, labels and that every referenced file exists with its
    /// recorded digest.
    pub fn validate(&self) -> Result<()> {
        if self.format_version != MANIFEST_VERSION {
            return Err(DataError::Manifest(format!("unsupported format version {}", self.format_version)).into());
        }
        if let Some(scheme) = &self.scheme {
            scheme.validate()?;
        }
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.id.as_str()) {
                return Err(DataError::Manifest(format!("duplicate image id `{}`", e.id)).into());
            }
            if let Some(label) = &e.label {
                match &self.scheme {
                    Some(s) if s.index_of(label).is_some() => {}
                    Some(s) => {
                        return Err(DataError::Manifest(format!(
                            "entry `{}` has label `{label}` outside scheme `{}`",
                            e.id, s.name
                        ))
                        .into())
                    }
                    None => {
                        return Err(DataError::Manifest(format!("entry `{}` is labeled but no scheme is set", e.id)).into())
                    }
                }
            }
            let files = std::iter::once((self.image_path(e), Some(&e.image_digest)))
                .chain(self.mask_path(e).map(|m| (m, e.mask_digest.as_ref())));
            for (path, expected) in files {
                let found = file_digest(&path)?;
                match expected {
                    Some(exp) if *exp == found => {}
                    Some(exp) => {
                        return Err(DataError::DigestMismatch {
                            path,
                            expected: exp.clone(),
                            found,
                        }
                        .into())
                    }
                    None => return Err(DataError::Manifest(format!("entry `{}` lacks a mask digest", e.id)).into()),
                }
            }
        }
        Ok(())
    }

    pub fn label_index(&self, entry: &ManifestEntry) -> Option<usize> {
        let scheme = self.scheme.as_ref()?;
        scheme.index_of(entry.label.as_ref()?)
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut bytes = serde_json::to_vec_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_json()?)
    }
}

/// Reads and fully validates a manifest; relative paths resolve against its
/// directory.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let path = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
    let bytes = fs::read(&path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::from(DataError::Missing(path.clone()))
        } else {
            Error::io(&path, e)
        }
    })?;
    let mut manifest: DatasetManifest =
        serde_json::from_slice(&bytes).map_err(|e| DataError::Manifest(format!("{}: {e}", path.display())))?;
    manifest.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    manifest.validate()?;
    Ok(manifest)
}

/// Decoded images, masks and label indices of a manifest, in entry order.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub images: Vec<Tensor<f64>>,
    pub masks: Vec<Option<LabelMask>>,
    pub labels: Vec<Option<usize>>,
    pub scheme: Option<AttributeScheme>,
    pub digests: Vec<String>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

pub fn load_dataset(manifest: &DatasetManifest) -> Result<Dataset> {
    let mut data = Dataset {
        ids: Vec::new(),
        images: Vec::new(),
        masks: Vec::new(),
        labels: Vec::new(),
        scheme: manifest.scheme.clone(),
        digests: Vec::new(),
    };
    for e in &manifest.entries {
        let image = load_image(&manifest.image_path(e))?;
        let mask = match manifest.mask_path(e) {
            Some(p) => {
                let m = load_mask(&p)?;
                let (_, h, w) = image.chw()?;
                if (m.width(), m.height()) != (w, h) {
                    return Err(DataError::DimensionMismatch(format!(
                        "entry `{}`: image is {w}x{h}, mask is {}x{}",
                        e.id,
                        m.width(),
                        m.height()
                    ))
                    .into());
                }
                Some(m)
            }
            None => None,
        };
        data.ids.push(e.id.clone());
        data.images.push(image);
        data.masks.push(mask);
        data.labels.push(manifest.label_index(e));
        data.digests.push(e.image_digest.clone());
    }
    Ok(data)
}
