//! Dense tensors and the layer primitives used by the face-parsing networks.
//!
//! Images and activations are laid out channels × height × width, row-major.
//! All primitives are pure functions of their arguments; per-output
//! accumulation order is fixed so results never depend on scheduling.

mod activation;
mod conv;
mod dense;
pub mod gradcheck;
mod pool;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use activation::{relu_backward, relu_forward, softmax, softmax_cross_entropy, SoftmaxLoss};
pub use conv::{conv2d_backward, conv2d_forward, ConvGrads};
pub use dense::{dense_backward, dense_forward, DenseGrads};
pub use pool::{maxpool_backward, maxpool_forward, ArgmaxRecord};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T = f64> {
    shape: Vec<usize>,
    data: Vec<T>,
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return Err(Error::Shape("tensor shape has no extents".into()));
    }
    if let Some(pos) = shape.iter().position(|&e| e == 0) {
        return Err(Error::Shape(format!(
            "extent {pos} of shape {shape:?} is zero"
        )));
    }
    Ok(shape.iter().product())
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let n = check_shape(shape)?;
        if n != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} holds {n} elements but {} were supplied",
                data.len()
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Panics on an empty shape or a zero extent.
    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, T::zero())
    }

    pub fn filled(shape: &[usize], value: T) -> Self {
        let n = check_shape(shape).expect("valid tensor shape");
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> T) -> Result<Self> {
        let n = check_shape(shape)?;
        Ok(Self {
            shape: shape.to_vec(),
            data: (0..n).map(&mut f).collect(),
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row-major flat offset of a multi-index.
    pub fn offset(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.shape.len() {
            return Err(Error::Shape(format!(
                "index {index:?} has rank {} but tensor has shape {:?}",
                index.len(),
                self.shape
            )));
        }
        let mut off = 0;
        for (axis, (&i, &extent)) in index.iter().zip(&self.shape).enumerate() {
            if i >= extent {
                return Err(Error::Shape(format!(
                    "index {i} out of range on axis {axis} (extent {extent})"
                )));
            }
            off = off * extent + i;
        }
        Ok(off)
    }

    pub fn get(&self, index: &[usize]) -> Result<T> {
        Ok(self.data[self.offset(index)?])
    }

    pub fn set(&mut self, index: &[usize], value: T) -> Result<()> {
        let off = self.offset(index)?;
        self.data[off] = value;
        Ok(())
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Self::new(shape, self.data)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| U::lit(v.as_f64())).collect(),
        }
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    /// `(channels, height, width)` of a rank-3 tensor.
    pub fn chw(&self) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(Error::Shape(format!(
                "expected a channels x height x width tensor, got shape {:?}",
                self.shape
            ))),
        }
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "cannot add {:?} into {:?}",
                other.shape, self.shape
            )));
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: T) {
        for v in &mut self.data {
            *v = *v * factor;
        }
    }
}

/// Zero padding on the four sides of a spatial plane, in pixels.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Padding {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

impl Padding {
    pub const NONE: Padding = Padding {
        top: 0,
        bottom: 0,
        left: 0,
        right: 0,
    };

    pub fn new(top: usize, bottom: usize, left: usize, right: usize) -> Self {
        Self {
            top,
            bottom,
            left,
            right,
        }
    }

    pub fn as_tuple(&self) -> (usize, usize, usize, usize) {
        (self.top, self.bottom, self.left, self.right)
    }
}

/// `floor((input + pad_total - kernel) / stride) + 1`, or `None` when that is
/// not a positive extent.
pub fn output_extent(input: usize, kernel: usize, stride: usize, pad_total: usize) -> Option<usize> {
    if kernel == 0 || stride == 0 {
        return None;
    }
    let span = input + pad_total;
    if span < kernel {
        return None;
    }
    Some((span - kernel) / stride + 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvGeometry {
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub padding: Padding,
}

impl ConvGeometry {
    pub fn new(kernel: (usize, usize), stride: (usize, usize), padding: Padding) -> Result<Self> {
        let g = Self {
            kernel,
            stride,
            padding,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn square(kernel: usize, stride: usize) -> Self {
        Self {
            kernel: (kernel, kernel),
            stride: (stride, stride),
            padding: Padding::NONE,
        }
    }

    pub fn with_padding(mut self, padding: Padding) -> Self {
        self.padding = padding;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel.0 == 0 || self.kernel.1 == 0 {
            return Err(Error::Geometry(format!("kernel {:?} has a zero extent", self.kernel)));
        }
        if self.stride.0 == 0 || self.stride.1 == 0 {
            return Err(Error::Geometry(format!("stride {:?} has a zero extent", self.stride)));
        }
        Ok(())
    }

    /// Output `(height, width)` for an input plane, or an error when an extent
    /// would be non-positive.
    pub fn output_hw(&self, height: usize, width: usize) -> Result<(usize, usize)> {
        self.validate()?;
        let p = &self.padding;
        let oh = output_extent(height, self.kernel.0, self.stride.0, p.top + p.bottom);
        let ow = output_extent(width, self.kernel.1, self.stride.1, p.left + p.right);
        match (oh, ow) {
            (Some(oh), Some(ow)) => Ok((oh, ow)),
            _ => Err(Error::Geometry(format!(
                "kernel {:?} stride {:?} padding {:?} on a {height}x{width} input gives a non-positive output",
                self.kernel,
                self.stride,
                p.as_tuple()
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_invariants() {
        assert!(Tensor::<f64>::new(&[2, 3], vec![0.0; 6]).is_ok());
        assert!(Tensor::<f64>::new(&[2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::<f64>::new(&[2, 0], vec![]).is_err());
        assert!(Tensor::<f64>::new(&[], vec![]).is_err());
    }

    #[test]
    fn index_math() {
        let t = Tensor::<f64>::from_fn(&[2, 3, 4], |i| i as f64).unwrap();
        assert_eq!(t.get(&[1, 2, 3]).unwrap(), 23.0);
        assert_eq!(t.get(&[0, 1, 0]).unwrap(), 4.0);
        assert!(t.get(&[2, 0, 0]).is_err());
        assert!(t.get(&[0, 0]).is_err());
    }

    #[test]
    fn output_extent_formula() {
        assert_eq!(output_extent(250, 5, 2, 1), Some(124));
        assert_eq!(output_extent(4, 3, 1, 0), Some(2));
        assert_eq!(output_extent(2, 3, 1, 0), None);
        let g = ConvGeometry::square(5, 2).with_padding(Padding::new(0, 1, 0, 1));
        assert_eq!(g.output_hw(250, 250).unwrap(), (124, 124));
        assert!(ConvGeometry::square(5, 1).output_hw(3, 3).is_err());
    }

    #[test]
    fn cast_round_trip_f32() {
        let t = Tensor::<f64>::new(&[3], vec![0.5, -1.25, 3.0]).unwrap();
        let back: Tensor<f64> = t.cast::<f32>().cast();
        assert_eq!(t, back);
    }
}
