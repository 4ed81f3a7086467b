use crate::dataio::resize_bilinear;
use crate::error::{DataError, Error, Result};
use crate::faceseg::{decode_planes, encode_planes, ProbabilityMaps, FEATURE_CLASSES};
use crate::tensor::Tensor;

pub const FEATURE_PLANES: usize = FEATURE_CLASSES.len();

/// Hair, eyes, brows, nose and mouth probability planes stacked as a
/// `[5, H, W]` tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub planes: Tensor<f64>,
    pub image_id: String,
}

impl FeatureVector {
    pub fn height(&self) -> usize {
        self.planes.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.planes.shape()[2]
    }

    pub fn to_sidecar(&self) -> Result<Vec<u8>> {
        encode_planes(self.width(), self.height(), self.planes.data())
    }

    pub fn from_sidecar(bytes: &[u8], image_id: impl Into<String>) -> Result<Self> {
        let stack = decode_planes(bytes)?;
        if stack.planes != FEATURE_PLANES {
            return Err(DataError::Sidecar(format!("expected {FEATURE_PLANES} planes, found {}", stack.planes)).into());
        }
        Ok(Self {
            planes: Tensor::new(&[FEATURE_PLANES, stack.height, stack.width], stack.data)?,
            image_id: image_id.into(),
        })
    }
}

/// Selects the five feature planes and resamples them bilinearly to
/// `(height, width)`. Skin and background never enter the result.
pub fn build_feature_vector(pms: &ProbabilityMaps, height: usize, width: usize) -> Result<FeatureVector> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidArgument(format!("feature size {width}x{height} is degenerate")));
    }
    let mut data = Vec::with_capacity(FEATURE_PLANES * pms.width() * pms.height());
    for &class in &FEATURE_CLASSES {
        data.extend_from_slice(pms.plane(class as usize));
    }
    let stacked = Tensor::new(&[FEATURE_PLANES, pms.height(), pms.width()], data)?;
    Ok(FeatureVector {
        planes: resize_bilinear(&stacked, height, width)?,
        image_id: pms.image_id.clone(),
    })
}
