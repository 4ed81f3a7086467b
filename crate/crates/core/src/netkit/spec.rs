use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{output_extent, ConvGeometry, Padding};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        kernel: [usize; 2],
        stride: [usize; 2],
        feature_maps: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        padding: Option<Padding>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        declared_output: Option<[usize; 2]>,
    },
    MaxPool {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        kernel: [usize; 2],
        stride: [usize; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        padding: Option<Padding>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        declared_output: Option<[usize; 2]>,
    },
    Dense {
        outputs: usize,
    },
    Relu,
    SoftmaxHead,
}

impl LayerSpec {
    pub fn conv(kernel: usize, stride: usize, feature_maps: usize) -> Self {
        LayerSpec::Conv {
            name: None,
            kernel: [kernel; 2],
            stride: [stride; 2],
            feature_maps,
            padding: None,
            declared_output: None,
        }
    }

    pub fn max_pool(kernel: usize, stride: usize) -> Self {
        LayerSpec::MaxPool {
            name: None,
            kernel: [kernel; 2],
            stride: [stride; 2],
            padding: None,
            declared_output: None,
        }
    }

    pub fn named(mut self, label: &str) -> Self {
        if let LayerSpec::Conv { name, .. } | LayerSpec::MaxPool { name, .. } = &mut self {
            *name = Some(label.to_string());
        }
        self
    }

    pub fn declared(mut self, out: [usize; 2]) -> Self {
        if let LayerSpec::Conv { declared_output, .. } | LayerSpec::MaxPool { declared_output, .. } = &mut self {
            *declared_output = Some(out);
        }
        self
    }

    pub fn padded(mut self, pad: Padding) -> Self {
        if let LayerSpec::Conv { padding, .. } | LayerSpec::MaxPool { padding, .. } = &mut self {
            *padding = Some(pad);
        }
        self
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::MaxPool { .. } => "max_pool",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Relu => "relu",
            LayerSpec::SoftmaxHead => "softmax_head",
        }
    }

    /// Display label: the explicit name, or `#<index> <kind>`.
    pub fn label(&self, index: usize) -> String {
        match self {
            LayerSpec::Conv { name: Some(n), .. } | LayerSpec::MaxPool { name: Some(n), .. } => n.clone(),
            _ => format!("#{index} {}", self.kind()),
        }
    }

    /// Geometry of a conv/pool layer; `None` for other kinds or unresolved padding.
    pub fn geometry(&self) -> Option<ConvGeometry> {
        match self {
            LayerSpec::Conv {
                kernel,
                stride,
                padding: Some(p),
                ..
            }
            | LayerSpec::MaxPool {
                kernel,
                stride,
                padding: Some(p),
                ..
            } => Some(ConvGeometry {
                kernel: (kernel[0], kernel[1]),
                stride: (stride[0], stride[1]),
                padding: *p,
            }),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// `[channels, height, width]`
    pub input_shape: [usize; 3],
    pub class_count: usize,
    pub layers: Vec<LayerSpec>,
}

/// Layer index and the shape it produces.
pub type ShapeTrace = Vec<(usize, Vec<usize>)>;

/// Does every window along one axis overlap the unpadded input?
fn windows_overlap(input: usize, kernel: usize, stride: usize, before: usize, out: usize) -> bool {
    (0..out).all(|o| {
        let start = o * stride;
        start + kernel > before && start < before + input
    })
}

/// Minimal-total padding along one axis reaching `target`; within a total the
/// smaller leading (top/left) share is tried first.
fn resolve_axis(input: usize, kernel: usize, stride: usize, target: usize) -> Option<(usize, usize)> {
    for total in 0..=2 * kernel {
        if output_extent(input, kernel, stride, total) != Some(target) {
            continue;
        }
        for before in 0..=total {
            if windows_overlap(input, kernel, stride, before, target) {
                return Some((before, total - before));
            }
        }
    }
    None
}

impl NetworkSpec {
    /// Fills every conv/pool padding: declared outputs are met with the
    /// minimal padding, undeclared unresolved layers get none.
    pub fn resolve_padding(&self) -> Result<NetworkSpec> {
        let mut spec = self.clone();
        let [_, mut h, mut w] = self.input_shape;
        let mut flat: Option<usize> = None;
        for (i, layer) in spec.layers.iter_mut().enumerate() {
            let label = layer.label(i);
            match layer {
                LayerSpec::Conv {
                    kernel,
                    stride,
                    padding,
                    declared_output,
                    ..
                }
                | LayerSpec::MaxPool {
                    kernel,
                    stride,
                    padding,
                    declared_output,
                    ..
                } => {
                    if flat.is_some() {
                        return Err(Error::Shape(format!("layer {label} needs a feature-map input")));
                    }
                    if let Some([th, tw]) = *declared_output {
                        let ph = resolve_axis(h, kernel[0], stride[0], th);
                        let pw = resolve_axis(w, kernel[1], stride[1], tw);
                        match (ph, pw) {
                            (Some((top, bottom)), Some((left, right))) => {
                                *padding = Some(Padding::new(top, bottom, left, right));
                            }
                            _ => {
                                return Err(Error::Geometry(format!(
                                    "layer {label}: no padding up to {} pixels maps {h}x{w} to the declared {th}x{tw}",
                                    2 * kernel[0].max(kernel[1])
                                )))
                            }
                        }
                    } else if padding.is_none() {
                        *padding = Some(Padding::NONE);
                    }
                    let geom = layer.geometry().expect("padding just resolved");
                    let (oh, ow) = geom
                        .output_hw(h, w)
                        .map_err(|e| Error::Geometry(format!("layer {label}: {e}")))?;
                    h = oh;
                    w = ow;
                }
                LayerSpec::Dense { outputs } => flat = Some(*outputs),
                LayerSpec::Relu | LayerSpec::SoftmaxHead => {}
            }
        }
        Ok(spec)
    }

    /// Output shape after each layer. Requires resolved padding.
    pub fn infer_shapes(&self) -> Result<ShapeTrace> {
        let [c0, h0, w0] = self.input_shape;
        if c0 == 0 || h0 == 0 || w0 == 0 {
            return Err(Error::Shape(format!("input shape {:?} has a zero extent", self.input_shape)));
        }
        if self.class_count == 0 {
            return Err(Error::Shape("class_count must be positive".into()));
        }
        let heads = self.layers.iter().filter(|l| matches!(l, LayerSpec::SoftmaxHead)).count();
        if heads != 1 || !matches!(self.layers.last(), Some(LayerSpec::SoftmaxHead)) {
            return Err(Error::Shape("network must end in exactly one softmax_head layer".into()));
        }
        let mut shape = vec![c0, h0, w0];
        let mut trace = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let label = layer.label(i);
            shape = match layer {
                LayerSpec::Conv { padding: None, .. } | LayerSpec::MaxPool { padding: None, .. } => {
                    return Err(Error::Geometry(format!("layer {label}: padding unresolved")))
                }
                LayerSpec::Conv { .. } | LayerSpec::MaxPool { .. } => {
                    let [c, h, w] = shape[..] else {
                        return Err(Error::Shape(format!(
                            "layer {label} needs a feature-map input, got {shape:?}"
                        )));
                    };
                    let geom = layer.geometry().expect("resolved");
                    let (oh, ow) = geom
                        .output_hw(h, w)
                        .map_err(|e| Error::Geometry(format!("layer {label}: {e}")))?;
                    let decl = match layer {
                        LayerSpec::Conv { declared_output, .. } | LayerSpec::MaxPool { declared_output, .. } => {
                            *declared_output
                        }
                        _ => None,
                    };
                    if let Some(d) = decl {
                        if d != [oh, ow] {
                            return Err(Error::Geometry(format!(
                                "layer {label}: produces {oh}x{ow} but declares {}x{}",
                                d[0], d[1]
                            )));
                        }
                    }
                    let channels = match layer {
                        LayerSpec::Conv { feature_maps, .. } => {
                            if *feature_maps == 0 {
                                return Err(Error::Shape(format!("layer {label}: zero feature maps")));
                            }
                            *feature_maps
                        }
                        _ => c,
                    };
                    vec![channels, oh, ow]
                }
                LayerSpec::Dense { outputs } => {
                    if *outputs == 0 {
                        return Err(Error::Shape(format!("layer {label}: zero outputs")));
                    }
                    vec![*outputs]
                }
                LayerSpec::Relu => shape,
                LayerSpec::SoftmaxHead => {
                    if shape != [self.class_count] {
                        return Err(Error::Shape(format!(
                            "softmax_head expects {} logits, previous layer gives {shape:?}",
                            self.class_count
                        )));
                    }
                    shape
                }
            };
            trace.push((i, shape.clone()));
        }
        Ok(trace)
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    /// Same architecture with `k` outputs: the class count and the width of
    /// the last dense layer change.
    pub fn with_class_count(&self, k: usize) -> NetworkSpec {
        let mut spec = self.clone();
        spec.class_count = k;
        if let Some(LayerSpec::Dense { outputs }) =
            spec.layers.iter_mut().rev().find(|l| matches!(l, LayerSpec::Dense { .. }))
        {
            *outputs = k;
        }
        spec
    }
}
