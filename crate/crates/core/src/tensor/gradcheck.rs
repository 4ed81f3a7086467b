//! Central finite-difference verification of analytic gradients.
//!
//! A [`Differentiable`] fragment maps an input tensor and its parameter
//! blocks to a scalar loss and reports analytic gradients for every block and
//! for the input. [`gradient_check`] perturbs coordinates by `±h`, compares
//! `(L(x+h) - L(x-h)) / 2h` against the analytic value, and records the worst
//! relative error per block:
//!
//! `|analytic - numeric| / max(|analytic|, |numeric|, floor)`
//!
//! The floor keeps the ratio meaningful where both gradients vanish.

use super::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, maxpool_backward, maxpool_forward,
    relu_backward, relu_forward, softmax_cross_entropy, ConvGeometry, Tensor,
};
use crate::error::Result;
use crate::rng::SeededRng;

pub trait Differentiable {
    fn block_names(&self) -> Vec<String>;
    fn block_mut(&mut self, index: usize) -> &mut [f64];
    /// Loss, gradient with respect to the input, gradients per parameter block.
    fn loss_and_grads(&self, input: &Tensor<f64>) -> Result<(f64, Tensor<f64>, Vec<Vec<f64>>)>;

    fn loss(&self, input: &Tensor<f64>) -> Result<f64> {
        Ok(self.loss_and_grads(input)?.0)
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    pub step: f64,
    pub tolerance: f64,
    pub floor: f64,
    /// Check a seeded random subset of at most this many coordinates per block.
    pub max_coords_per_block: Option<usize>,
    pub check_input: bool,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tolerance: 1e-4,
            floor: 1e-6,
            max_coords_per_block: None,
            check_input: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockReport {
    pub name: String,
    pub max_rel_error: f64,
    pub worst_coord: Option<usize>,
    pub coords_checked: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub blocks: Vec<BlockReport>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.passed)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.max_rel_error).fold(0.0, f64::max)
    }

    pub fn failing(&self) -> impl Iterator<Item = &BlockReport> {
        self.blocks.iter().filter(|b| !b.passed)
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(floor);
    (analytic - numeric).abs() / denom
}

fn pick_coords(len: usize, limit: Option<usize>, rng: &mut SeededRng) -> Vec<usize> {
    match limit {
        Some(k) if k < len => {
            let mut c = rng.sample_indices(len, k);
            c.sort_unstable();
            c
        }
        _ => (0..len).collect(),
    }
}

pub fn gradient_check<F: Differentiable + ?Sized>(
    fragment: &mut F,
    input: &Tensor<f64>,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let (_, grad_input, grads) = fragment.loss_and_grads(input)?;
    let mut rng = SeededRng::new(opts.seed);
    let h = opts.step;
    let mut blocks = Vec::new();

    for (b, name) in fragment.block_names().into_iter().enumerate() {
        let coords = pick_coords(grads[b].len(), opts.max_coords_per_block, &mut rng);
        let mut worst = (0.0, None);
        for &i in &coords {
            let orig = fragment.block_mut(b)[i];
            fragment.block_mut(b)[i] = orig + h;
            let plus = fragment.loss(input)?;
            fragment.block_mut(b)[i] = orig - h;
            let minus = fragment.loss(input)?;
            fragment.block_mut(b)[i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let err = relative_error(grads[b][i], numeric, opts.floor);
            if err > worst.0 || worst.1.is_none() {
                worst = (err, Some(i));
            }
        }
        blocks.push(BlockReport {
            name,
            max_rel_error: worst.0,
            worst_coord: worst.1,
            coords_checked: coords.len(),
            passed: worst.0 <= opts.tolerance,
        });
    }

    if opts.check_input {
        let coords = pick_coords(input.len(), opts.max_coords_per_block, &mut rng);
        let mut probe = input.clone();
        let mut worst = (0.0, None);
        for &i in &coords {
            let orig = probe.data()[i];
            probe.data_mut()[i] = orig + h;
            let plus = fragment.loss(&probe)?;
            probe.data_mut()[i] = orig - h;
            let minus = fragment.loss(&probe)?;
            probe.data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let err = relative_error(grad_input.data()[i], numeric, opts.floor);
            if err > worst.0 || worst.1.is_none() {
                worst = (err, Some(i));
            }
        }
        blocks.push(BlockReport {
            name: "input".into(),
            max_rel_error: worst.0,
            worst_coord: worst.1,
            coords_checked: coords.len(),
            passed: worst.0 <= opts.tolerance,
        });
    }

    Ok(GradCheckReport {
        tolerance: opts.tolerance,
        blocks,
    })
}

/// Single-primitive fragments. Each reduces its output to a scalar with a
/// fixed projection `L = Σ r_i y_i`, so the upstream gradient is `r`.
pub mod fragments {
    use super::*;

    fn project(out: &Tensor<f64>, r: &[f64]) -> f64 {
        out.data().iter().zip(r).map(|(a, b)| a * b).sum()
    }

    fn upstream(out: &Tensor<f64>, r: &[f64]) -> Result<Tensor<f64>> {
        Tensor::new(out.shape(), r.to_vec())
    }

    pub fn random_projection(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = SeededRng::new(seed);
        (0..len).map(|_| rng.uniform(-1.0, 1.0)).collect()
    }

    /// `L = Σ r_i x_i`.
    pub struct Identity {
        pub projection: Vec<f64>,
    }

    impl Differentiable for Identity {
        fn block_names(&self) -> Vec<String> {
            Vec::new()
        }
        fn block_mut(&mut self, _: usize) -> &mut [f64] {
            &mut []
        }
        fn loss_and_grads(&self, input: &Tensor<f64>) -> Result<(f64, Tensor<f64>, Vec<Vec<f64>>)> {
            Ok((project(input, &self.projection), upstream(input, &self.projection)?, vec![]))
        }
    }

    pub struct Conv {
        pub weights: Tensor<f64>,
        pub bias: Tensor<f64>,
        pub geom: ConvGeometry,
        pub projection: Vec<f64>,
    }

    impl Differentiable for Conv {
        fn block_names(&self) -> Vec<String> {
            vec!["conv.weights".into(), "conv.bias".into()]
        }
        fn block_mut(&mut self, index: usize) -> &mut [f64] {
            match index {
                0 => self.weights.data_mut(),
                _ => self.bias.data_mut(),
            }
        }
        fn loss_and_grads(&self, input: &Tensor<f64>) -> Result<(f64, Tensor<f64>, Vec<Vec<f64>>)> {
            let out = conv2d_forward(input, &self.weights, &self.bias, &self.geom)?;
            let g = conv2d_backward(input, &self.weights, &self.geom, &upstream(&out, &self.projection)?)?;
            Ok((
                project(&out, &self.projection),
                g.input,
                vec![g.weights.into_data(), g.bias.into_data()],
            ))
        }
    }

    pub struct Dense {
        pub weights: Tensor<f64>,
        pub bias: Tensor<f64>,
        pub projection: Vec<f64>,
    }

    impl Differentiable for Dense {
        fn block_names(&self) -> Vec<String> {
            vec!["dense.weights".into(), "dense.bias".into()]
        }
        fn block_mut(&mut self, index: usize) -> &mut [f64] {
            match index {
                0 => self.weights.data_mut(),
                _ => self.bias.data_mut(),
            }
        }
        fn loss_and_grads(&self, input: &Tensor<f64>) -> Result<(f64, Tensor<f64>, Vec<Vec<f64>>)> {
            let out = dense_forward(input, &self.weights, &self.bias)?;
            let g = dense_backward(input, &self.weights, &upstream(&out, &self.projection)?)?;
            Ok((
                project(&out, &self.projection),
                g.input,
                vec![g.weights.into_data(), g.bias.into_data()],
            ))
        }
    }

    pub struct MaxPool {
        pub geom: ConvGeometry,
        pub projection: Vec<f64>,
    }

    impl Differentiable for MaxPool {
        fn block_names(&self) -> Vec<String> {
            Vec::new()
        }
        fn block_mut(&mut self, _: usize) -> &mut [f64] {
            &mut []
        }
        fn loss_and_grads(&self, input: &Tensor<f64>) -> Result<(f64, Tensor<f64>, Vec<Vec<f64>>)> {
            let (out, rec) = maxpool_forward(input, &self.geom)?;
            let g = maxpool_backward(&rec, &upstream(&out, &self.projection)?)?;
            Ok((project(&out, &self.projection), g, vec![]))
        }
    }

    pub struct Relu {
        pub projection: Vec<f64>,
    }

    impl Differentiable for Relu {
        fn block_names(&self) -> Vec<String> {
            Vec::new()
        }
        fn block_mut(&mut self, _: usize) -> &mut [f64] {
            &mut []
        }
        fn loss_and_grads(&self, input: &Tensor<f64>) -> Result<(f64, Tensor<f64>, Vec<Vec<f64>>)> {
            let out = relu_forward(input);
            let g = relu_backward(input, &upstream(&out, &self.projection)?)?;
            Ok((project(&out, &self.projection), g, vec![]))
        }
    }

    /// Cross-entropy of the input treated as a logit vector.
    pub struct SoftmaxCe {
        pub true_class: usize,
    }

    impl Differentiable for SoftmaxCe {
        fn block_names(&self) -> Vec<String> {
            Vec::new()
        }
        fn block_mut(&mut self, _: usize) -> &mut [f64] {
            &mut []
        }
        fn loss_and_grads(&self, input: &Tensor<f64>) -> Result<(f64, Tensor<f64>, Vec<Vec<f64>>)> {
            let out = softmax_cross_entropy(input.data(), self.true_class)?;
            Ok((out.loss, Tensor::new(input.shape(), out.grad_logits)?, vec![]))
        }
    }

    /// Wraps a fragment and negates the analytic gradient of one block.
    pub struct SignFlipped<F> {
        pub inner: F,
        pub block: usize,
    }

    impl<F: Differentiable> Differentiable for SignFlipped<F> {
        fn block_names(&self) -> Vec<String> {
            self.inner.block_names()
        }
        fn block_mut(&mut self, index: usize) -> &mut [f64] {
            self.inner.block_mut(index)
        }
        fn loss_and_grads(&self, input: &Tensor<f64>) -> Result<(f64, Tensor<f64>, Vec<Vec<f64>>)> {
            let (loss, gi, mut grads) = self.inner.loss_and_grads(input)?;
            for v in &mut grads[self.block] {
                *v = -*v;
            }
            Ok((loss, gi, grads))
        }
    }
}
