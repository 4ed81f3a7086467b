use super::conv::dot;
use super::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct DenseGrads<T> {
    /// Same shape as the forward input (which may be a feature-map stack).
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

/// `(outputs, inputs, batch)`. An input holding exactly `inputs` values is a
/// single item; otherwise the leading extent is a batch axis.
fn check<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>) -> Result<(usize, usize, Option<usize>)> {
    let [m, n] = weights.shape()[..] else {
        return Err(Error::Shape(format!(
            "dense weights must be outputs x inputs, got {:?}",
            weights.shape()
        )));
    };
    if input.len() == n {
        return Ok((m, n, None));
    }
    let b = input.shape()[0];
    if input.shape().len() >= 2 && input.len() == b * n {
        return Ok((m, n, Some(b)));
    }
    Err(Error::Shape(format!(
        "dense weights {:?} expect {n} inputs but input {:?} has {}",
        weights.shape(),
        input.shape(),
        input.len()
    )))
}

/// Affine map `W x + b`. The input is read in flat row-major order; a
/// `[B, ...]` input yields `[B, m]`.
pub fn dense_forward<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, n, batch) = check(input, weights)?;
    if bias.shape() != [m] {
        return Err(Error::Shape(format!(
            "dense bias {:?} does not match weights {:?}",
            bias.shape(),
            weights.shape()
        )));
    }
    let mut out = Vec::with_capacity(input.len() / n * m);
    for x in input.data().chunks_exact(n) {
        out.extend(
            weights
                .data()
                .chunks_exact(n)
                .zip(bias.data())
                .map(|(row, &b)| b + dot(row, x)),
        );
    }
    match batch {
        None => Tensor::new(&[m], out),
        Some(b) => Tensor::new(&[b, m], out),
    }
}

pub fn dense_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    upstream: &Tensor<T>,
) -> Result<DenseGrads<T>> {
    let (m, n, batch) = check(input, weights)?;
    let items = batch.unwrap_or(1);
    if upstream.len() != m * items {
        return Err(Error::Shape(format!(
            "upstream gradient {:?} does not match {m} dense outputs x {items} items",
            upstream.shape()
        )));
    }
    let mut gx = vec![T::zero(); n * items];
    let mut gw = vec![T::zero(); m * n];
    let mut gb = vec![T::zero(); m];
    for ((x, g), gx_item) in input
        .data()
        .chunks_exact(n)
        .zip(upstream.data().chunks_exact(m))
        .zip(gx.chunks_exact_mut(n))
    {
        for (((row, gw_row), &gv), gbv) in weights
            .data()
            .chunks_exact(n)
            .zip(gw.chunks_exact_mut(n))
            .zip(g)
            .zip(gb.iter_mut())
        {
            *gbv = *gbv + gv;
            for ((acc, &wv), (gwv, &xv)) in gx_item.iter_mut().zip(row).zip(gw_row.iter_mut().zip(x)) {
                *acc = *acc + wv * gv;
                *gwv = *gwv + gv * xv;
            }
        }
    }
    Ok(DenseGrads {
        input: Tensor::new(input.shape(), gx)?,
        weights: Tensor::new(weights.shape(), gw)?,
        bias: Tensor::new(&[m], gb)?,
    })
}
