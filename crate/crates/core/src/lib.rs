//! Two-stage face parsing and attribute classification.
//!
//! A small convolutional network labels every pixel of a face image with one
//! of seven classes (see [`faceseg::PALETTE`]) by classifying the patch
//! centered on it. The resulting per-class probability maps feed two
//! consumers: a second network trained on the hair, eyes, brows, nose and
//! mouth planes ([`attrclass`]), and a random forest that ranks classes by
//! how much they contribute to the label ([`importance`]).
//!
//! Layer math lives in [`tensor`] and is generic over [`Scalar`]; training
//! and inference run in `f64`, checkpoints store `f32`.

pub mod attrclass;
pub mod checksum;
pub mod dataio;
pub mod error;
pub mod evalkit;
pub mod faceseg;
pub mod importance;
pub mod netkit;
pub mod profile;
pub mod rng;
pub mod scalar;
pub mod tensor;

pub use error::{CheckpointError, DataError, Error, Result};
pub use scalar::Scalar;

pub type Tensor64 = tensor::Tensor<f64>;
pub type Tensor32 = tensor::Tensor<f32>;
pub type Network64 = netkit::Network<f64>;
pub type Network32 = netkit::Network<f32>;
