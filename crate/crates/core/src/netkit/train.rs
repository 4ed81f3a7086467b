use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use super::network::{argmax, stack, Network};
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Items evaluated together inside one optimizer batch. Fixed, so gradient
/// summation order depends only on the batch composition.
pub const MICRO_BATCH: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    /// Epochs 50, learning rate 1e-5, momentum 0.8, batch 250.
    pub fn paper() -> Self {
        Self {
            epochs: 50,
            learning_rate: 1e-5,
            momentum: 0.8,
            batch_size: 250,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be finite and non-negative", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum {} must lie in [0, 1)", self.momentum)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Heavy-ball momentum: `v <- mu * v - lr * g`, `w <- w + v`, with `v`
/// starting at zero.
#[derive(Clone, Debug)]
pub struct MomentumSgd<T> {
    pub learning_rate: T,
    pub momentum: T,
    velocity: Vec<Vec<T>>,
}

impl<T: Scalar> MomentumSgd<T> {
    pub fn new(learning_rate: T, momentum: T) -> Self {
        Self {
            learning_rate,
            momentum,
            velocity: Vec::new(),
        }
    }

    pub fn velocity(&self) -> &[Vec<T>] {
        &self.velocity
    }

    pub fn step(&mut self, params: &mut [&mut [T]], grads: &[&[T]]) {
        if self.velocity.is_empty() {
            self.velocity = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
        }
        for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.velocity) {
            for ((w, &gi), vi) in p.iter_mut().zip(g.iter()).zip(v.iter_mut()) {
                *vi = self.momentum * *vi - self.learning_rate * gi;
                *w = *w + *vi;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub accuracy: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochStats>,
    pub steps: usize,
    pub stopped_early: bool,
}

/// Hooks into the training loop. Returning `Break` stops training after the
/// current step or epoch.
pub trait TrainObserver {
    fn on_step(&mut self, _step: usize, _batch_loss: f64) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }

    fn on_epoch(&mut self, _stats: &EpochStats) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }
}

pub struct NoObserver;

impl TrainObserver for NoObserver {}

impl<F: FnMut(usize, f64) -> ControlFlow<()>> TrainObserver for F {
    fn on_step(&mut self, step: usize, batch_loss: f64) -> ControlFlow<()> {
        self(step, batch_loss)
    }
}

/// Mini-batch training with momentum SGD on mean cross-entropy.
///
/// Each epoch visits the dataset once in an order shuffled by a stream
/// seeded from `config.seed`; the final short batch is kept and a batch size
/// larger than the dataset means full-batch steps. Gradients are summed over
/// micro-batches of [`MICRO_BATCH`] items in batch order, then averaged.
pub fn train<T: Scalar>(
    net: &mut Network<T>,
    data: &[(Tensor<T>, usize)],
    config: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<History> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let classes = net.class_count();
    if let Some((i, (_, c))) = data.iter().enumerate().find(|(_, (_, c))| *c >= classes) {
        return Err(Error::InvalidArgument(format!(
            "sample {i} has label {c} but the network has {classes} classes"
        )));
    }

    let mut rng = SeededRng::new(config.seed);
    let mut opt = MomentumSgd::new(T::lit(config.learning_rate), T::lit(config.momentum));
    let batch = config.batch_size.min(data.len());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = History::default();

    'epochs: for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut steps = 0;
        for chunk in order.chunks(batch) {
            let mut acc: Vec<Tensor<T>> = net.blocks().iter().map(|b| Tensor::zeros(b.shape())).collect();
            let mut batch_loss = 0.0;
            for micro in chunk.chunks(MICRO_BATCH) {
                let items: Vec<&Tensor<T>> = micro.iter().map(|&i| &data[i].0).collect();
                let labels: Vec<usize> = micro.iter().map(|&i| data[i].1).collect();
                let r = net.batch_gradients(&stack(&items)?, &labels)?;
                for ((&idx, loss), probs) in micro.iter().zip(&r.losses).zip(&r.probs) {
                    let loss = loss.as_f64();
                    if !loss.is_finite() {
                        return Err(Error::Training {
                            step: history.steps + 1,
                            reason: format!("non-finite loss {loss} on sample {idx} in epoch {epoch}"),
                        });
                    }
                    batch_loss += loss;
                    if argmax(probs) == data[idx].1 {
                        correct += 1;
                    }
                }
                for (a, g) in acc.iter_mut().zip(&r.grads) {
                    a.add_assign(g)?;
                }
            }
            let inv = T::one() / T::lit(chunk.len() as f64);
            for a in &mut acc {
                a.scale(inv);
            }
            {
                let grads: Vec<&[T]> = acc.iter().map(|a| a.data()).collect();
                let mut blocks = net.blocks_mut();
                let mut params: Vec<&mut [T]> = blocks.iter_mut().map(|b| b.data_mut()).collect();
                opt.step(&mut params, &grads);
            }
            loss_sum += batch_loss;
            steps += 1;
            history.steps += 1;
            if observer.on_step(history.steps, batch_loss / chunk.len() as f64).is_break() {
                history.stopped_early = true;
                history.epochs.push(EpochStats {
                    epoch,
                    mean_loss: loss_sum / chunk_total(&order, batch, steps) as f64,
                    accuracy: correct as f64 / chunk_total(&order, batch, steps) as f64,
                    steps,
                });
                break 'epochs;
            }
        }
        let stats = EpochStats {
            epoch,
            mean_loss: loss_sum / data.len() as f64,
            accuracy: correct as f64 / data.len() as f64,
            steps,
        };
        log::debug!("epoch {epoch}: loss {:.6} acc {:.4}", stats.mean_loss, stats.accuracy);
        let flow = observer.on_epoch(&stats);
        history.epochs.push(stats);
        if flow.is_break() {
            history.stopped_early = true;
            break;
        }
    }
    Ok(history)
}

/// Samples seen in the first `steps` batches of an epoch.
fn chunk_total(order: &[usize], batch: usize, steps: usize) -> usize {
    (steps * batch).min(order.len())
}
