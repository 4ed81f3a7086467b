use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// BT.601 luma weights.
pub const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

const LEVELS: usize = 256;

pub fn luminance(image: &Tensor<f64>) -> Result<Vec<f64>> {
    let (c, h, w) = image.chw()?;
    if c != 3 {
        return Err(Error::Shape(format!("expected a 3-channel image, got shape {:?}", image.shape())));
    }
    let d = image.data();
    let n = h * w;
    Ok((0..n)
        .map(|p| LUMA[0] * d[p] + LUMA[1] * d[n + p] + LUMA[2] * d[2 * n + p])
        .collect())
}

fn level(y: f64) -> usize {
    (y.clamp(0.0, 1.0) * (LEVELS - 1) as f64).round() as usize
}

/// Histogram equalization of the luma channel.
///
/// Luma is quantized to 256 levels and each level is mapped to the middle of
/// its cumulative-histogram step, `(cdf(v - 1) + cdf(v)) / 2n`, so tied
/// pixels share their mean rank and the output mean is 1/2. Each pixel's
/// RGB values are shifted by its luma change, which keeps both color
/// difference channels, and the result is clipped to `[0, 1]`. An image with
/// a single luma level is returned unchanged.
pub fn normalize_illumination(image: &Tensor<f64>) -> Result<Tensor<f64>> {
    let y = luminance(image)?;
    let n = y.len();
    let mut hist = [0usize; LEVELS];
    for &v in &y {
        hist[level(v)] += 1;
    }
    let mut cdf = [0usize; LEVELS];
    let mut run = 0;
    for (slot, count) in cdf.iter_mut().zip(hist) {
        run += count;
        *slot = run;
    }
    if hist.iter().any(|&c| c == n) {
        return Ok(image.clone());
    }
    let denom = (2 * n) as f64;
    let mut out = image.clone();
    let data = out.data_mut();
    for (p, &luma) in y.iter().enumerate() {
        let v = level(luma);
        let target = (cdf[v] - hist[v] + cdf[v]) as f64 / denom;
        let shift = target - luma;
        for c in 0..3 {
            let v = &mut data[c * n + p];
            *v = (*v + shift).clamp(0.0, 1.0);
        }
    }
    Ok(out)
}
