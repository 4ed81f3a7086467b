use super::{ConvGeometry, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

#[derive(Clone, Copy)]
struct Dims {
    batched: bool,
    b: usize,
    c: usize,
    h: usize,
    w: usize,
    f: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
}

impl Dims {
    /// Taps per filter.
    fn k(&self) -> usize {
        self.c * self.kh * self.kw
    }

    /// Output pixels per item.
    fn p(&self) -> usize {
        self.oh * self.ow
    }

    fn out_shape(&self) -> Vec<usize> {
        if self.batched {
            vec![self.b, self.f, self.oh, self.ow]
        } else {
            vec![self.f, self.oh, self.ow]
        }
    }
}

/// `(batch, channels, height, width)` of a `[C,H,W]` or `[B,C,H,W]` tensor.
pub(super) fn bchw<T: Scalar>(t: &Tensor<T>) -> Result<(bool, usize, usize, usize, usize)> {
    match t.shape()[..] {
        [c, h, w] => Ok((false, 1, c, h, w)),
        [b, c, h, w] => Ok((true, b, c, h, w)),
        _ => Err(Error::Shape(format!(
            "expected a [C, H, W] or [B, C, H, W] tensor, got shape {:?}",
            t.shape()
        ))),
    }
}

fn dims<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    geom: &ConvGeometry,
) -> Result<Dims> {
    let (batched, b, c, h, w) = bchw(input)?;
    let [f, wc, kh, kw] = weights.shape()[..] else {
        return Err(Error::Shape(format!(
            "conv weights must be filters x channels x kh x kw, got {:?}",
            weights.shape()
        )));
    };
    if wc != c {
        return Err(Error::Shape(format!(
            "conv weights {:?} expect {wc} channels but input {:?} has {c}",
            weights.shape(),
            input.shape()
        )));
    }
    if (kh, kw) != geom.kernel {
        return Err(Error::Shape(format!(
            "conv weights {:?} disagree with kernel {:?}",
            weights.shape(),
            geom.kernel
        )));
    }
    if let Some(bias) = bias {
        if bias.shape() != [f] {
            return Err(Error::Shape(format!(
                "conv bias {:?} does not match weights {:?}",
                bias.shape(),
                weights.shape()
            )));
        }
    }
    let (oh, ow) = geom.output_hw(h, w)?;
    Ok(Dims {
        batched,
        b,
        c,
        h,
        w,
        f,
        kh,
        kw,
        oh,
        ow,
    })
}

/// Output rows/columns `lo..hi` whose tap `k` lands inside the unpadded input.
#[inline]
fn valid_range(out: usize, input: usize, stride: usize, k: usize, pad: usize) -> (usize, usize) {
    if input + pad <= k {
        return (0, 0);
    }
    let lo = if pad > k { (pad - k).div_ceil(stride) } else { 0 };
    let hi = ((input - 1 + pad - k) / stride + 1).min(out);
    (lo.min(hi), hi)
}

/// Unfolds the input into a `[K, B*P]` matrix: row `k = (c, ky, kx)`, column
/// `b * P + (oy, ox)`. Padded taps are zero.
fn im2col<T: Scalar>(x: &[T], d: &Dims, geom: &ConvGeometry) -> Vec<T> {
    let (sh, sw) = geom.stride;
    let pad = geom.padding;
    let p = d.p();
    let bp = d.b * p;
    let mut cols = vec![T::zero(); d.k() * bp];
    for ci in 0..d.c {
        for ky in 0..d.kh {
            let (oy_lo, oy_hi) = valid_range(d.oh, d.h, sh, ky, pad.top);
            for kx in 0..d.kw {
                let (ox_lo, ox_hi) = valid_range(d.ow, d.w, sw, kx, pad.left);
                if ox_lo >= ox_hi {
                    continue;
                }
                let k = (ci * d.kh + ky) * d.kw + kx;
                let row = &mut cols[k * bp..(k + 1) * bp];
                for bi in 0..d.b {
                    let plane = &x[(bi * d.c + ci) * d.h * d.w..(bi * d.c + ci + 1) * d.h * d.w];
                    for oy in oy_lo..oy_hi {
                        let iy = oy * sh + ky - pad.top;
                        let src = &plane[iy * d.w..(iy + 1) * d.w];
                        let dst = &mut row[bi * p + oy * d.ow + ox_lo..bi * p + oy * d.ow + ox_hi];
                        let ix0 = ox_lo * sw + kx - pad.left;
                        if sw == 1 {
                            dst.copy_from_slice(&src[ix0..ix0 + dst.len()]);
                        } else {
                            for (o, v) in dst.iter_mut().zip(src[ix0..].iter().step_by(sw)) {
                                *o = *v;
                            }
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Scatter-adds a `[K, B*P]` column gradient back onto the input layout.
fn col2im<T: Scalar>(cols: &[T], d: &Dims, geom: &ConvGeometry) -> Vec<T> {
    let (sh, sw) = geom.stride;
    let pad = geom.padding;
    let p = d.p();
    let bp = d.b * p;
    let mut x = vec![T::zero(); d.b * d.c * d.h * d.w];
    for ci in 0..d.c {
        for ky in 0..d.kh {
            let (oy_lo, oy_hi) = valid_range(d.oh, d.h, sh, ky, pad.top);
            for kx in 0..d.kw {
                let (ox_lo, ox_hi) = valid_range(d.ow, d.w, sw, kx, pad.left);
                if ox_lo >= ox_hi {
                    continue;
                }
                let k = (ci * d.kh + ky) * d.kw + kx;
                let row = &cols[k * bp..(k + 1) * bp];
                for bi in 0..d.b {
                    let base = (bi * d.c + ci) * d.h * d.w;
                    for oy in oy_lo..oy_hi {
                        let iy = oy * sh + ky - pad.top;
                        let src = &row[bi * p + oy * d.ow + ox_lo..bi * p + oy * d.ow + ox_hi];
                        let ix0 = ox_lo * sw + kx - pad.left;
                        let dst = &mut x[base + iy * d.w..base + (iy + 1) * d.w];
                        for (j, &g) in src.iter().enumerate() {
                            let ix = ix0 + j * sw;
                            dst[ix] = dst[ix] + g;
                        }
                    }
                }
            }
        }
    }
    x
}

/// Upper bound on unfolded elements per group; batches are split so the
/// column matrix stays cache-resident.
const COLS_BUDGET: usize = 1 << 16;

fn group_size(d: &Dims) -> usize {
    (COLS_BUDGET / (d.k() * d.p()).max(1)).clamp(1, d.b)
}

/// 2-D convolution (cross-correlation) of a `[C, H, W]` input, or a
/// `[B, C, H, W]` batch, with `[F, C, kh, kw]` filters. Padding is zero-filled.
///
/// Every output element is `bias + Σ w·x` summed over taps in `(c, ky, kx)`
/// order, independent of the batch size.
pub fn conv2d_forward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    geom: &ConvGeometry,
) -> Result<Tensor<T>> {
    let d = dims(input, weights, Some(bias), geom)?;
    let (k, p) = (d.k(), d.p());
    let in_item = d.c * d.h * d.w;
    let wt = weights.data();
    let mut out = vec![T::zero(); d.b * d.f * p];

    let group = group_size(&d);
    for b0 in (0..d.b).step_by(group) {
        let gb = group.min(d.b - b0);
        let gd = Dims { b: gb, ..d };
        let cols = im2col(&input.data()[b0 * in_item..(b0 + gb) * in_item], &gd, geom);
        let bp = gb * p;
        let mut row = vec![T::zero(); bp];
        for fo in 0..d.f {
            row.fill(bias.data()[fo]);
            for (ki, &wv) in wt[fo * k..(fo + 1) * k].iter().enumerate() {
                let col = &cols[ki * bp..(ki + 1) * bp];
                for (o, &v) in row.iter_mut().zip(col) {
                    *o = *o + wv * v;
                }
            }
            for bi in 0..gb {
                let dst = ((b0 + bi) * d.f + fo) * p;
                out[dst..dst + p].copy_from_slice(&row[bi * p..(bi + 1) * p]);
            }
        }
    }
    Tensor::new(&d.out_shape(), out)
}

/// Exact gradients of [`conv2d_forward`] with respect to input, weights and
/// bias. For a batch, weight and bias gradients are summed over items.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    geom: &ConvGeometry,
    upstream: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let d = dims(input, weights, None, geom)?;
    if upstream.shape() != d.out_shape() {
        return Err(Error::Shape(format!(
            "upstream gradient {:?} does not match conv output {:?}",
            upstream.shape(),
            d.out_shape()
        )));
    }
    let (k, p) = (d.k(), d.p());
    let in_item = d.c * d.h * d.w;
    let wt = weights.data();
    let u = upstream.data();

    let mut gx = vec![T::zero(); input.len()];
    let mut gw = vec![T::zero(); d.f * k];
    let mut gbias = vec![T::zero(); d.f];

    let group = group_size(&d);
    for b0 in (0..d.b).step_by(group) {
        let gb = group.min(d.b - b0);
        let gd = Dims { b: gb, ..d };
        let cols = im2col(&input.data()[b0 * in_item..(b0 + gb) * in_item], &gd, geom);
        let bp = gb * p;
        let mut g_row = vec![T::zero(); bp];
        let mut gcols = vec![T::zero(); k * bp];
        for fo in 0..d.f {
            for bi in 0..gb {
                let src = ((b0 + bi) * d.f + fo) * p;
                g_row[bi * p..(bi + 1) * p].copy_from_slice(&u[src..src + p]);
            }
            gbias[fo] = gbias[fo] + g_row.iter().copied().sum();
            for ki in 0..k {
                let col = &cols[ki * bp..(ki + 1) * bp];
                gw[fo * k + ki] = gw[fo * k + ki] + dot(&g_row, col);
                let wv = wt[fo * k + ki];
                for (gc, &gv) in gcols[ki * bp..(ki + 1) * bp].iter_mut().zip(&g_row) {
                    *gc = *gc + wv * gv;
                }
            }
        }
        let gx_group = col2im(&gcols, &gd, geom);
        gx[b0 * in_item..(b0 + gb) * in_item].copy_from_slice(&gx_group);
    }
    Ok(ConvGrads {
        input: Tensor::new(input.shape(), gx)?,
        weights: Tensor::new(weights.shape(), gw)?,
        bias: Tensor::new(&[d.f], gbias)?,
    })
}

/// Dot product with four interleaved partial sums (fixed order, vectorizable).
#[inline]
pub(super) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] = acc[0] + x[0] * y[0];
        acc[1] = acc[1] + x[1] * y[1];
        acc[2] = acc[2] + x[2] * y[2];
        acc[3] = acc[3] + x[3] * y[3];
    }
    let mut tail = T::zero();
    for (&x, &y) in ca.remainder().iter().zip(cb.remainder()) {
        tail = tail + x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}
