use super::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub fn relu_forward<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Passes `upstream` where `input > 0`; the subgradient at exactly zero is zero.
pub fn relu_backward<T: Scalar>(input: &Tensor<T>, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    if input.shape() != upstream.shape() {
        return Err(Error::Shape(format!(
            "relu upstream {:?} does not match input {:?}",
            upstream.shape(),
            input.shape()
        )));
    }
    let data = input
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(input.shape(), data)
}

/// Max-subtracted softmax of a logit vector.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[derive(Clone, Debug)]
pub struct SoftmaxLoss<T> {
    pub loss: T,
    pub probs: Vec<T>,
    pub grad_logits: Vec<T>,
}

/// Softmax followed by negative log-likelihood of `true_class`.
///
/// The loss is computed as `logsumexp(z - max) - (z_true - max)` so that a
/// dominant true logit gives a loss of exactly zero instead of `-ln(1 - eps)`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &[T], true_class: usize) -> Result<SoftmaxLoss<T>> {
    if true_class >= logits.len() {
        return Err(Error::InvalidArgument(format!(
            "class {true_class} out of range for {} logits",
            logits.len()
        )));
    }
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    let loss = total.ln() - (logits[true_class] - max);
    let probs: Vec<T> = exps.into_iter().map(|e| e / total).collect();
    let grad_logits = probs
        .iter()
        .enumerate()
        .map(|(i, &p)| if i == true_class { p - T::one() } else { p })
        .collect();
    Ok(SoftmaxLoss {
        loss,
        probs,
        grad_logits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_definition() {
        let x = Tensor::new(&[3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu_forward(&x).data(), &[0.0, 0.0, 2.0]);
        let neg = Tensor::new(&[4], vec![-1.0, -0.5, -3.0, -1e-9]).unwrap();
        assert!(relu_forward(&neg).data().iter().all(|&v| v == 0.0));
        let g = relu_backward(&x, &Tensor::filled(&[3], 1.0)).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn uniform_logits() {
        let out = softmax_cross_entropy(&[0.0f64; 7], 3).unwrap();
        for &p in &out.probs {
            assert!((p - 1.0 / 7.0).abs() < 1e-15);
        }
        assert!((out.loss - 7f64.ln()).abs() < 1e-12);
        assert!((out.loss - 1.945910).abs() < 1e-6);
    }

    #[test]
    fn dominant_true_logit() {
        let out = softmax_cross_entropy(&[0.0f64, 1000.0, -3.0], 1).unwrap();
        assert!(out.loss.abs() < 1e-12);
        assert!((out.probs[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn class_out_of_range() {
        assert!(softmax_cross_entropy(&[0.0f64; 7], 7).is_err());
    }

    #[test]
    fn gradient_is_probs_minus_onehot() {
        let z = [0.3, -1.2, 2.0, 0.0];
        let out = softmax_cross_entropy(&z, 2).unwrap();
        for i in 0..4 {
            let expect = out.probs[i] - if i == 2 { 1.0 } else { 0.0 };
            assert_eq!(out.grad_logits[i], expect);
        }
    }
}
