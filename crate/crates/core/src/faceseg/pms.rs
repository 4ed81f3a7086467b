use std::fs;
use std::path::{Path, PathBuf};

use image::GrayImage;
use serde::Serialize;

use super::mask::LabelMask;
use super::palette::{CLASS_COUNT, PALETTE};
use super::sidecar::{decode_planes, encode_planes};
use crate::error::{DataError, Error, Result};
use crate::netkit::write_atomic;

/// Seven per-pixel class probability planes, plane-major in palette order.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityMaps {
    width: usize,
    height: usize,
    planes: Vec<f64>,
    pub model_id: String,
    pub image_id: String,
}

#[derive(Serialize)]
struct Provenance<'a> {
    model_id: &'a str,
    image_id: &'a str,
    width: usize,
    height: usize,
}

pub const SUM_TOLERANCE: f64 = 1e-9;

impl ProbabilityMaps {
    /// Validates non-negativity and the per-pixel sum.
    pub fn new(width: usize, height: usize, planes: Vec<f64>) -> Result<Self> {
        let area = width * height;
        if area == 0 || planes.len() != CLASS_COUNT * area {
            return Err(DataError::DimensionMismatch(format!(
                "{width}x{height} probability maps need {} values, got {}",
                CLASS_COUNT * area,
                planes.len()
            ))
            .into());
        }
        for p in 0..area {
            let mut sum = 0.0;
            for c in 0..CLASS_COUNT {
                let v = planes[c * area + p];
                if !(v >= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "probability {v} at pixel {p} of plane {c} is negative or NaN"
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(Error::InvalidArgument(format!(
                    "probabilities at pixel ({}, {}) sum to {sum}",
                    p % width,
                    p / width
                )));
            }
        }
        Ok(Self {
            width,
            height,
            planes,
            model_id: String::new(),
            image_id: String::new(),
        })
    }

    pub fn uniform(width: usize, height: usize) -> Self {
        Self::new(width, height, vec![1.0 / CLASS_COUNT as f64; CLASS_COUNT * width * height])
            .expect("uniform maps are valid")
    }

    pub fn one_hot(mask: &LabelMask) -> Self {
        let area = mask.width() * mask.height();
        let mut planes = vec![0.0; CLASS_COUNT * area];
        for (p, &c) in mask.data().iter().enumerate() {
            planes[c as usize * area + p] = 1.0;
        }
        Self::new(mask.width(), mask.height(), planes).expect("one-hot maps are valid")
    }

    pub fn with_provenance(mut self, model_id: impl Into<String>, image_id: impl Into<String>) -> Self {
        self.model_id = model_id.into();
        self.image_id = image_id.into();
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn planes(&self) -> &[f64] {
        &self.planes
    }

    pub fn plane(&self, class: usize) -> &[f64] {
        let area = self.width * self.height;
        &self.planes[class * area..(class + 1) * area]
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; CLASS_COUNT] {
        let area = self.width * self.height;
        let p = y * self.width + x;
        std::array::from_fn(|c| self.planes[c * area + p])
    }

    pub fn to_sidecar(&self) -> Result<Vec<u8>> {
        encode_planes(self.width, self.height, &self.planes)
    }

    pub fn from_sidecar(bytes: &[u8]) -> Result<Self> {
        let stack = decode_planes(bytes)?;
        if stack.planes != CLASS_COUNT {
            return Err(DataError::Sidecar(format!("expected {CLASS_COUNT} planes, found {}", stack.planes)).into());
        }
        Self::new(stack.width, stack.height, stack.data)
    }
}

/// Per-pixel argmax; ties go to the lower class index.
pub fn argmax_mask(pms: &ProbabilityMaps) -> LabelMask {
    let area = pms.width * pms.height;
    let data = (0..area)
        .map(|p| {
            let mut best = 0;
            for c in 1..CLASS_COUNT {
                if pms.planes[c * area + p] > pms.planes[best * area + p] {
                    best = c;
                }
            }
            best as u8
        })
        .collect();
    LabelMask::new(pms.width, pms.height, data).expect("argmax indices are in range")
}

/// Grayscale rendering of one plane: `round(255 p)`.
pub fn quantize_plane(pms: &ProbabilityMaps, class: usize) -> GrayImage {
    let raw = pms.plane(class).iter().map(|&p| (255.0 * p).round().clamp(0.0, 255.0) as u8).collect();
    GrayImage::from_raw(pms.width as u32, pms.height as u32, raw).expect("buffer matches dimensions")
}

pub const SIDECAR_FILE: &str = "pms.fppm";
pub const PROVENANCE_FILE: &str = "pms.json";

pub fn pm_file_name(class: usize) -> String {
    format!("pm_{}.png", PALETTE[class].name)
}

/// Writes `pm_<class>.png` for all seven classes, the lossless sidecar and a
/// provenance note. Returns the written paths.
pub fn export_pms(pms: &ProbabilityMaps, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for class in 0..CLASS_COUNT {
        let path = dir.join(pm_file_name(class));
        let bytes = crate::dataio::encode_gray_png(&quantize_plane(pms, class))?;
        write_atomic(&path, &bytes)?;
        written.push(path);
    }
    let sidecar = dir.join(SIDECAR_FILE);
    write_atomic(&sidecar, &pms.to_sidecar()?)?;
    written.push(sidecar);
    let note = dir.join(PROVENANCE_FILE);
    let json = serde_json::to_vec_pretty(&Provenance {
        model_id: &pms.model_id,
        image_id: &pms.image_id,
        width: pms.width,
        height: pms.height,
    })
    .map_err(|e| Error::Config(e.to_string()))?;
    write_atomic(&note, &json)?;
    written.push(note);
    Ok(written)
}

pub fn load_pms_sidecar(path: &Path) -> Result<ProbabilityMaps> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    ProbabilityMaps::from_sidecar(&bytes)
}
