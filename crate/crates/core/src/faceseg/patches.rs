use serde::{Deserialize, Serialize};

use super::mask::LabelMask;
use super::palette::CLASS_COUNT;
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BorderPolicy {
    /// Mirror about the edge pixel without repeating it.
    #[default]
    Reflect,
}

/// Square window classified by its center pixel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchPlan {
    pub size: usize,
    /// Grid step for candidate training centers.
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default)]
    pub border: BorderPolicy,
}

fn one() -> usize {
    1
}

impl PatchPlan {
    pub fn new(size: usize) -> Self {
        Self {
            size,
            stride: 1,
            border: BorderPolicy::Reflect,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size % 2 == 0 {
            return Err(Error::Config(format!("patch size {} must be odd", self.size)));
        }
        if self.stride == 0 {
            return Err(Error::Config("patch stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn half(&self) -> usize {
        self.size / 2
    }
}

/// Index into `0..n` mirrored at both ends, e.g. `-1 -> 1`, `n -> n - 2`.
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Reflect-pads a `[C, H, W]` image by `margin` on every side.
pub fn pad_reflect(image: &Tensor<f64>, margin: usize) -> Result<Tensor<f64>> {
    let (c, h, w) = image.chw()?;
    let (ph, pw) = (h + 2 * margin, w + 2 * margin);
    let src = image.data();
    let mut out = Vec::with_capacity(c * ph * pw);
    for ch in 0..c {
        for y in 0..ph {
            let sy = reflect_index(y as isize - margin as isize, h);
            for x in 0..pw {
                let sx = reflect_index(x as isize - margin as isize, w);
                out.push(src[(ch * h + sy) * w + sx]);
            }
        }
    }
    Tensor::new(&[c, ph, pw], out)
}

/// An image padded once so every centered patch is a plain crop.
pub struct PaddedImage {
    padded: Tensor<f64>,
    channels: usize,
    width: usize,
    height: usize,
    size: usize,
}

impl PaddedImage {
    pub fn new(image: &Tensor<f64>, plan: &PatchPlan) -> Result<Self> {
        plan.validate()?;
        let (channels, height, width) = image.chw()?;
        if height < plan.size || width < plan.size {
            return Err(Error::Shape(format!(
                "image {width}x{height} is smaller than one {0}x{0} patch",
                plan.size
            )));
        }
        Ok(Self {
            padded: pad_reflect(image, plan.half())?,
            channels,
            width,
            height,
            size: plan.size,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Appends the patch centered on `(x, y)` to `out` in `[C, s, s]` order.
    pub fn write_patch(&self, x: usize, y: usize, out: &mut Vec<f64>) {
        let pw = self.width + self.size - 1;
        let ph = self.height + self.size - 1;
        let src = self.padded.data();
        for ch in 0..self.channels {
            for dy in 0..self.size {
                let row = (ch * ph + y + dy) * pw + x;
                out.extend_from_slice(&src[row..row + self.size]);
            }
        }
    }

    pub fn patch(&self, x: usize, y: usize) -> Tensor<f64> {
        let mut data = Vec::with_capacity(self.channels * self.size * self.size);
        self.write_patch(x, y, &mut data);
        Tensor::new(&[self.channels, self.size, self.size], data).expect("patch buffer matches its shape")
    }
}

/// Patch centered on `(x, y)` with reflected borders.
pub fn extract_patch(image: &Tensor<f64>, x: usize, y: usize, plan: &PatchPlan) -> Result<Tensor<f64>> {
    let padded = PaddedImage::new(image, plan)?;
    if x >= padded.width || y >= padded.height {
        return Err(Error::InvalidArgument(format!("center ({x}, {y}) lies outside the image")));
    }
    Ok(padded.patch(x, y))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SamplingReport {
    pub quota: usize,
    pub per_class: [usize; CLASS_COUNT],
    /// Classes with no candidate center in the mask.
    pub absent: Vec<u8>,
}

#[derive(Clone, Debug)]
pub struct PatchSample {
    pub items: Vec<(Tensor<f64>, usize)>,
    pub centers: Vec<(usize, usize)>,
    pub report: SamplingReport,
}

/// Class-balanced sampling: for each class in palette order, up to `quota`
/// distinct centers drawn from that class's pixels on the plan's grid.
pub fn sample_training_patches(
    image: &Tensor<f64>,
    mask: &LabelMask,
    plan: &PatchPlan,
    seed: u64,
    quota: usize,
) -> Result<PatchSample> {
    if quota == 0 {
        return Err(Error::InvalidArgument("per-class quota must be at least 1".into()));
    }
    let padded = PaddedImage::new(image, plan)?;
    if (padded.width, padded.height) != (mask.width(), mask.height()) {
        return Err(crate::error::DataError::DimensionMismatch(format!(
            "image is {}x{} but mask is {}x{}",
            padded.width,
            padded.height,
            mask.width(),
            mask.height()
        ))
        .into());
    }
    let mut candidates: [Vec<(usize, usize)>; CLASS_COUNT] = Default::default();
    for y in (0..mask.height()).step_by(plan.stride) {
        for x in (0..mask.width()).step_by(plan.stride) {
            candidates[mask.get(x, y) as usize].push((x, y));
        }
    }
    let mut rng = SeededRng::new(seed);
    let mut sample = PatchSample {
        items: Vec::new(),
        centers: Vec::new(),
        report: SamplingReport {
            quota,
            ..Default::default()
        },
    };
    for (class, cands) in candidates.iter().enumerate() {
        if cands.is_empty() {
            sample.report.absent.push(class as u8);
            continue;
        }
        for i in rng.sample_indices(cands.len(), quota) {
            let (x, y) = cands[i];
            sample.items.push((padded.patch(x, y), class));
            sample.centers.push((x, y));
            sample.report.per_class[class] += 1;
        }
    }
    Ok(sample)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_matches_mirror_table() {
        let n = 4;
        let got: Vec<usize> = (-4..8).map(|i| reflect_index(i, n)).collect();
        assert_eq!(got, [2, 3, 2, 1, 0, 1, 2, 3, 2, 1, 0, 1]);
        assert_eq!(reflect_index(-3, 1), 0);
    }

    #[test]
    fn border_patch_is_reflected() {
        let img = Tensor::from_fn(&[1, 3, 3], |i| i as f64).unwrap();
        let p = extract_patch(&img, 0, 0, &PatchPlan::new(3)).unwrap();
        assert_eq!(p.data(), &[4.0, 3.0, 4.0, 1.0, 0.0, 1.0, 4.0, 3.0, 4.0]);
    }

    #[test]
    fn even_patch_rejected() {
        assert!(PatchPlan::new(4).validate().is_err());
    }
}
