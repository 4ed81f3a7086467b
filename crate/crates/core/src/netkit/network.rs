use super::spec::{LayerSpec, NetworkSpec};
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::scalar::Scalar;
use crate::tensor::gradcheck::Differentiable;
use crate::tensor::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, maxpool_backward, maxpool_forward,
    relu_backward, relu_forward, softmax, softmax_cross_entropy, ArgmaxRecord, ConvGeometry, Tensor,
};

#[derive(Clone, Debug, PartialEq)]
pub enum Layer<T> {
    Conv {
        geom: ConvGeometry,
        weights: Tensor<T>,
        bias: Tensor<T>,
    },
    MaxPool {
        geom: ConvGeometry,
    },
    Dense {
        weights: Tensor<T>,
        bias: Tensor<T>,
    },
    Relu,
}

/// A resolved network specification together with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T = f64> {
    spec: NetworkSpec,
    layers: Vec<Layer<T>>,
}

/// Per-layer inputs retained by [`Network::forward_trace`] for backpropagation.
#[derive(Clone, Debug)]
pub struct ForwardTrace<T> {
    inputs: Vec<Tensor<T>>,
    pools: Vec<Option<ArgmaxRecord>>,
}

#[derive(Clone, Debug)]
pub struct SampleResult<T> {
    pub loss: T,
    pub probs: Vec<T>,
    /// One tensor per parameter block, in [`Network::block_names`] order.
    pub grads: Vec<Tensor<T>>,
    pub grad_input: Tensor<T>,
}

impl<T: Scalar> Network<T> {
    /// Builds a network with all parameters zero.
    pub fn zeros(spec: &NetworkSpec) -> Result<Self> {
        Self::build(spec, |_, _| {})
    }

    /// Uniform fan-in initialization: weights in `±sqrt(6 / fan_in)` drawn from
    /// one [`SeededRng`] stream in layer order (weights row-major), biases zero.
    pub fn init(spec: &NetworkSpec, seed: u64) -> Result<Self> {
        let mut rng = SeededRng::new(seed);
        Self::build(spec, |weights, fan_in| {
            let bound = (6.0 / fan_in as f64).sqrt();
            for v in weights.data_mut() {
                *v = T::lit((2.0 * rng.next_f64() - 1.0) * bound);
            }
        })
    }

    fn build(spec: &NetworkSpec, mut fill: impl FnMut(&mut Tensor<T>, usize)) -> Result<Self> {
        let spec = spec.resolve_padding()?;
        let shapes = spec.infer_shapes()?;
        let mut layers = Vec::new();
        let mut in_shape = spec.input_shape.to_vec();
        for ((_, out_shape), layer) in shapes.iter().zip(&spec.layers) {
            match layer {
                LayerSpec::Conv { feature_maps, .. } => {
                    let geom = layer.geometry().expect("resolved");
                    let fan_in = in_shape[0] * geom.kernel.0 * geom.kernel.1;
                    let mut weights = Tensor::zeros(&[*feature_maps, in_shape[0], geom.kernel.0, geom.kernel.1]);
                    fill(&mut weights, fan_in);
                    layers.push(Layer::Conv {
                        geom,
                        weights,
                        bias: Tensor::zeros(&[*feature_maps]),
                    });
                }
                LayerSpec::MaxPool { .. } => layers.push(Layer::MaxPool {
                    geom: layer.geometry().expect("resolved"),
                }),
                LayerSpec::Dense { outputs } => {
                    let fan_in: usize = in_shape.iter().product();
                    let mut weights = Tensor::zeros(&[*outputs, fan_in]);
                    fill(&mut weights, fan_in);
                    layers.push(Layer::Dense {
                        weights,
                        bias: Tensor::zeros(&[*outputs]),
                    });
                }
                LayerSpec::Relu => layers.push(Layer::Relu),
                LayerSpec::SoftmaxHead => {}
            }
            in_shape = out_shape.clone();
        }
        Ok(Self { spec, layers })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn class_count(&self) -> usize {
        self.spec.class_count
    }

    pub fn block_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            if matches!(layer, Layer::Conv { .. } | Layer::Dense { .. }) {
                names.push(format!("layer{i}.weights"));
                names.push(format!("layer{i}.bias"));
            }
        }
        names
    }

    pub fn blocks(&self) -> Vec<&Tensor<T>> {
        let mut out = Vec::new();
        for layer in &self.layers {
            if let Layer::Conv { weights, bias, .. } | Layer::Dense { weights, bias } = layer {
                out.push(weights);
                out.push(bias);
            }
        }
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            if let Layer::Conv { weights, bias, .. } | Layer::Dense { weights, bias } = layer {
                out.push(weights);
                out.push(bias);
            }
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    /// Converts every parameter to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Network<U> {
        let layers = self
            .layers
            .iter()
            .map(|l| match l {
                Layer::Conv { geom, weights, bias } => Layer::Conv {
                    geom: *geom,
                    weights: weights.cast(),
                    bias: bias.cast(),
                },
                Layer::MaxPool { geom } => Layer::MaxPool { geom: *geom },
                Layer::Dense { weights, bias } => Layer::Dense {
                    weights: weights.cast(),
                    bias: bias.cast(),
                },
                Layer::Relu => Layer::Relu,
            })
            .collect();
        Network {
            spec: self.spec.clone(),
            layers,
        }
    }

    /// Batch size of a single `[C, H, W]` input (1) or a `[B, C, H, W]` batch.
    fn check_input(&self, input: &Tensor<T>) -> Result<usize> {
        let shape = input.shape();
        if shape == self.spec.input_shape {
            return Ok(1);
        }
        if shape.len() == 4 && shape[1..] == self.spec.input_shape {
            return Ok(shape[0]);
        }
        Err(Error::Shape(format!(
            "network expects input {:?} (optionally batched), got {:?}",
            self.spec.input_shape, shape
        )))
    }

    fn apply(layer: &Layer<T>, x: &Tensor<T>) -> Result<(Tensor<T>, Option<ArgmaxRecord>)> {
        Ok(match layer {
            Layer::Conv { geom, weights, bias } => (conv2d_forward(x, weights, bias, geom)?, None),
            Layer::MaxPool { geom } => {
                let (y, rec) = maxpool_forward(x, geom)?;
                (y, Some(rec))
            }
            Layer::Dense { weights, bias } => (dense_forward(x, weights, bias)?, None),
            Layer::Relu => (relu_forward(x), None),
        })
    }

    /// Logits: `[classes]` for one input, `[B, classes]` for a batch. Each
    /// item's logits are bitwise independent of the batch it is evaluated in.
    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let batch = self.check_input(input)?;
        let mut x = input.clone();
        for layer in &self.layers {
            x = Self::apply(layer, &x)?.0;
        }
        self.shape_logits(x, batch, input.shape().len() == 4)
    }

    fn shape_logits(&self, x: Tensor<T>, batch: usize, batched: bool) -> Result<Tensor<T>> {
        if batched {
            x.reshape(&[batch, self.spec.class_count])
        } else {
            x.reshape(&[self.spec.class_count])
        }
    }

    /// Distance of `input` from the nearest non-differentiable point of the
    /// network: the smallest `|x|` entering a ReLU and the smallest gap
    /// between the two largest values of a pooling window. Finite
    /// differences with a step well below this margin see a smooth function.
    pub fn kink_margin(&self, input: &Tensor<T>) -> Result<f64> {
        self.check_input(input)?;
        let mut margin = f64::INFINITY;
        let mut x = input.clone();
        for layer in &self.layers {
            match layer {
                Layer::Relu => {
                    for v in x.data() {
                        margin = margin.min(v.as_f64().abs());
                    }
                }
                Layer::MaxPool { geom } => margin = margin.min(pool_gap(&x, geom)?),
                _ => {}
            }
            x = Self::apply(layer, &x)?.0;
        }
        Ok(margin)
    }

    /// Class probabilities for one input.
    pub fn predict(&self, input: &Tensor<T>) -> Result<Vec<T>> {
        Ok(softmax(self.forward(input)?.data()))
    }

    pub fn forward_trace(&self, input: &Tensor<T>) -> Result<(Tensor<T>, ForwardTrace<T>)> {
        let batch = self.check_input(input)?;
        let mut trace = ForwardTrace {
            inputs: Vec::with_capacity(self.layers.len()),
            pools: Vec::with_capacity(self.layers.len()),
        };
        let mut x = input.clone();
        for layer in &self.layers {
            let (next, pool) = Self::apply(layer, &x)?;
            trace.inputs.push(std::mem::replace(&mut x, next));
            trace.pools.push(pool);
        }
        let logits = self.shape_logits(x, batch, input.shape().len() == 4)?;
        Ok((logits, trace))
    }

    /// Backpropagates `grad_logits` (shaped like the logits); returns the
    /// input gradient and per-block gradients summed over the batch.
    pub fn backward(&self, trace: &ForwardTrace<T>, grad_logits: Tensor<T>) -> Result<(Tensor<T>, Vec<Tensor<T>>)> {
        let mut grads_rev: Vec<Tensor<T>> = Vec::new();
        let mut g = grad_logits;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let x = &trace.inputs[i];
            g = match layer {
                Layer::Conv { geom, weights, .. } => {
                    let cg = conv2d_backward(x, weights, geom, &g)?;
                    grads_rev.push(cg.bias);
                    grads_rev.push(cg.weights);
                    cg.input
                }
                Layer::MaxPool { .. } => {
                    let rec = trace.pools[i].as_ref().expect("pool record");
                    maxpool_backward(rec, &g)?
                }
                Layer::Dense { weights, .. } => {
                    let dg = dense_backward(x, weights, &g)?;
                    grads_rev.push(dg.bias);
                    grads_rev.push(dg.weights);
                    dg.input
                }
                Layer::Relu => relu_backward(x, &g.reshape(x.shape())?)?,
            };
        }
        grads_rev.reverse();
        Ok((g, grads_rev))
    }

    /// Cross-entropy loss, probabilities and all gradients for one labeled input.
    pub fn sample_gradients(&self, input: &Tensor<T>, class: usize) -> Result<SampleResult<T>> {
        let (logits, trace) = self.forward_trace(input)?;
        let sm = softmax_cross_entropy(logits.data(), class)?;
        let (grad_input, grads) = self.backward(&trace, Tensor::new(logits.shape(), sm.grad_logits)?)?;
        Ok(SampleResult {
            loss: sm.loss,
            probs: sm.probs,
            grads,
            grad_input,
        })
    }

    /// Summed cross-entropy gradients over a `[B, C, H, W]` batch, with each
    /// item's loss and probabilities.
    pub fn batch_gradients(&self, inputs: &Tensor<T>, classes: &[usize]) -> Result<BatchResult<T>> {
        let (logits, trace) = self.forward_trace(inputs)?;
        let k = self.spec.class_count;
        if logits.len() != classes.len() * k {
            return Err(Error::Shape(format!(
                "{} labels for a batch of {} items",
                classes.len(),
                logits.len() / k
            )));
        }
        let mut losses = Vec::with_capacity(classes.len());
        let mut probs = Vec::with_capacity(classes.len());
        let mut grad_logits = Vec::with_capacity(logits.len());
        for (z, &c) in logits.data().chunks_exact(k).zip(classes) {
            let sm = softmax_cross_entropy(z, c)?;
            losses.push(sm.loss);
            probs.push(sm.probs);
            grad_logits.extend(sm.grad_logits);
        }
        let (_, grads) = self.backward(&trace, Tensor::new(logits.shape(), grad_logits)?)?;
        Ok(BatchResult { losses, probs, grads })
    }
}

#[derive(Clone, Debug)]
pub struct BatchResult<T> {
    pub losses: Vec<T>,
    pub probs: Vec<Vec<T>>,
    /// Gradients summed over the batch, in [`Network::block_names`] order.
    pub grads: Vec<Tensor<T>>,
}

/// Smallest top-two gap over all pooling windows (padding excluded).
fn pool_gap<T: Scalar>(x: &Tensor<T>, geom: &ConvGeometry) -> Result<f64> {
    let shape = x.shape();
    let (h, w) = (shape[shape.len() - 2], shape[shape.len() - 1]);
    let planes = x.len() / (h * w);
    let (oh, ow) = geom.output_hw(h, w)?;
    let (top, left) = (geom.padding.top as isize, geom.padding.left as isize);
    let mut gap = f64::INFINITY;
    for p in 0..planes {
        let plane = &x.data()[p * h * w..(p + 1) * h * w];
        for oy in 0..oh {
            for ox in 0..ow {
                let (mut best, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
                for ky in 0..geom.kernel.0 {
                    for kx in 0..geom.kernel.1 {
                        let y = (oy * geom.stride.0 + ky) as isize - top;
                        let xx = (ox * geom.stride.1 + kx) as isize - left;
                        if y < 0 || xx < 0 || y >= h as isize || xx >= w as isize {
                            continue;
                        }
                        let v = plane[y as usize * w + xx as usize].as_f64();
                        if v > best {
                            second = best;
                            best = v;
                        } else if v > second {
                            second = v;
                        }
                    }
                }
                // Tied zeros come from clamped ReLU units, which the ReLU
                // margin already keeps clamped.
                if second.is_finite() && !(best == 0.0 && second == 0.0) {
                    gap = gap.min(best - second);
                }
            }
        }
    }
    Ok(gap)
}

/// Stacks equally shaped items into one `[B, ...]` tensor.
pub fn stack<T: Scalar>(items: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let first = items
        .first()
        .ok_or_else(|| Error::InvalidArgument("cannot stack an empty list".into()))?;
    let mut data = Vec::with_capacity(items.len() * first.len());
    for t in items {
        if t.shape() != first.shape() {
            return Err(Error::Shape(format!("cannot stack {:?} with {:?}", t.shape(), first.shape())));
        }
        data.extend_from_slice(t.data());
    }
    let mut shape = vec![items.len()];
    shape.extend_from_slice(first.shape());
    Tensor::new(&shape, data)
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// A network paired with a target class, viewed as a scalar loss for
/// gradient checking.
pub struct LabeledNetwork {
    pub net: Network<f64>,
    pub class: usize,
}

impl Differentiable for LabeledNetwork {
    fn block_names(&self) -> Vec<String> {
        self.net.block_names()
    }

    fn block_mut(&mut self, index: usize) -> &mut [f64] {
        self.net.blocks_mut().swap_remove(index).data_mut()
    }

    fn loss_and_grads(&self, input: &Tensor<f64>) -> Result<(f64, Tensor<f64>, Vec<Vec<f64>>)> {
        let r = self.net.sample_gradients(input, self.class)?;
        Ok((r.loss, r.grad_input, r.grads.into_iter().map(Tensor::into_data).collect()))
    }
}
