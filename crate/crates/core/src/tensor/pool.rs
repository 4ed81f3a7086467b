use super::conv::bchw;
use super::{ConvGeometry, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Flat input offset of the winning element for each pooled output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArgmaxRecord {
    pub input_shape: Vec<usize>,
    pub winners: Vec<usize>,
}

/// Max pooling over each channel of a `[C, H, W]` or `[B, C, H, W]` tensor.
/// Padded cells act as `-inf`; a window that lies entirely in padding is
/// rejected. Ties go to the lowest flat index.
pub fn maxpool_forward<T: Scalar>(
    input: &Tensor<T>,
    geom: &ConvGeometry,
) -> Result<(Tensor<T>, ArgmaxRecord)> {
    let (batched, b, c, h, w) = bchw(input)?;
    let planes = b * c;
    let (oh, ow) = geom.output_hw(h, w)?;
    let (kh, kw) = geom.kernel;
    let (sh, sw) = geom.stride;
    let p = geom.padding;
    let x = input.data();

    let mut out = Vec::with_capacity(planes * oh * ow);
    let mut winners = Vec::with_capacity(planes * oh * ow);
    for plane in 0..planes {
        let base = plane * h * w;
        for oy in 0..oh {
            // rows of the window inside the input, as signed positions
            let y0 = (oy * sh) as isize - p.top as isize;
            let ys = y0.max(0) as usize..((y0 + kh as isize).min(h as isize)).max(0) as usize;
            for ox in 0..ow {
                let x0 = (ox * sw) as isize - p.left as isize;
                let xs = x0.max(0) as usize..((x0 + kw as isize).min(w as isize)).max(0) as usize;
                if ys.is_empty() || xs.is_empty() {
                    return Err(Error::Geometry(format!(
                        "max-pool window at output ({oy}, {ox}) lies entirely in padding"
                    )));
                }
                let mut best = T::neg_infinity();
                let mut arg = usize::MAX;
                for iy in ys.clone() {
                    for ix in xs.clone() {
                        let idx = base + iy * w + ix;
                        if arg == usize::MAX || x[idx] > best {
                            best = x[idx];
                            arg = idx;
                        }
                    }
                }
                out.push(best);
                winners.push(arg);
            }
        }
    }
    let shape = if batched { vec![b, c, oh, ow] } else { vec![c, oh, ow] };
    Ok((
        Tensor::new(&shape, out)?,
        ArgmaxRecord {
            input_shape: input.shape().to_vec(),
            winners,
        },
    ))
}

/// Routes each upstream gradient to the input element that won its window.
pub fn maxpool_backward<T: Scalar>(record: &ArgmaxRecord, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    if upstream.len() != record.winners.len() {
        return Err(Error::Shape(format!(
            "upstream gradient {:?} does not match {} pooled outputs",
            upstream.shape(),
            record.winners.len()
        )));
    }
    let mut grad = Tensor::zeros(&record.input_shape);
    let g = grad.data_mut();
    for (&src, &u) in record.winners.iter().zip(upstream.data()) {
        g[src] = g[src] + u;
    }
    Ok(grad)
}
