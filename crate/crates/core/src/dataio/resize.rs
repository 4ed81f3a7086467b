use crate::error::{Error, Result};
use crate::faceseg::LabelMask;
use crate::tensor::Tensor;

/// Source coordinate and blend weight for half-pixel-centered sampling.
fn taps(out: usize, input: usize) -> Vec<(usize, usize, f64)> {
    let scale = input as f64 / out as f64;
    (0..out)
        .map(|i| {
            let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (input - 1) as f64);
            let lo = s.floor() as usize;
            let hi = (lo + 1).min(input - 1);
            (lo, hi, s - lo as f64)
        })
        .collect()
}

/// Bilinear resampling of every plane of a `[C, H, W]` tensor to
/// `(height, width)`. Returns a copy when the size is unchanged.
pub fn resize_bilinear(image: &Tensor<f64>, height: usize, width: usize) -> Result<Tensor<f64>> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidArgument(format!("target size {width}x{height} is empty")));
    }
    let (c, h, w) = image.chw()?;
    if (h, w) == (height, width) {
        return Ok(image.clone());
    }
    let ys = taps(height, h);
    let xs = taps(width, w);
    let src = image.data();
    let mut out = Vec::with_capacity(c * height * width);
    for ch in 0..c {
        let plane = &src[ch * h * w..(ch + 1) * h * w];
        for &(y0, y1, fy) in &ys {
            for &(x0, x1, fx) in &xs {
                let top = plane[y0 * w + x0] * (1.0 - fx) + plane[y0 * w + x1] * fx;
                let bottom = plane[y1 * w + x0] * (1.0 - fx) + plane[y1 * w + x1] * fx;
                out.push(top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    Tensor::new(&[c, height, width], out)
}

fn nearest(out: usize, input: usize) -> Vec<usize> {
    (0..out).map(|i| ((i * input * 2 + input) / (2 * out)).min(input - 1)).collect()
}

/// Nearest-neighbour resampling; class values are copied, never blended.
pub fn resize_mask(mask: &LabelMask, height: usize, width: usize) -> Result<LabelMask> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidArgument(format!("target size {width}x{height} is empty")));
    }
    let ys = nearest(height, mask.height());
    let xs = nearest(width, mask.width());
    let mut data = Vec::with_capacity(height * width);
    for &y in &ys {
        for &x in &xs {
            data.push(mask.get(x, y));
        }
    }
    LabelMask::new(width, height, data)
}
