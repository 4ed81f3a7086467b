use std::path::Path;

use super::feature::{FeatureVector, FEATURE_PLANES};
use super::scheme::AttributeScheme;
use crate::error::{Error, Result};
use crate::netkit::{
    argmax, decode_checkpoint, encode_checkpoint, train, CheckpointMeta, History, Network, NetworkSpec, TrainConfig,
    TrainObserver,
};
use crate::tensor::softmax;

#[derive(Clone, Debug)]
pub struct AttributeModel {
    pub network: Network<f64>,
    pub scheme: AttributeScheme,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Classification {
    pub label: usize,
    pub name: String,
    pub probabilities: Vec<f64>,
}

fn check_spec(spec: &NetworkSpec, scheme: &AttributeScheme) -> Result<()> {
    scheme.validate()?;
    if spec.input_shape[0] != FEATURE_PLANES {
        return Err(Error::Config(format!(
            "attribute network takes {} input channels, expected {FEATURE_PLANES}",
            spec.input_shape[0]
        )));
    }
    if spec.class_count != scheme.class_count() {
        return Err(Error::Config(format!(
            "attribute network has {} classes but scheme `{}` has {} labels",
            spec.class_count,
            scheme.name,
            scheme.class_count()
        )));
    }
    Ok(())
}

impl AttributeModel {
    pub fn new(network: Network<f64>, scheme: AttributeScheme) -> Result<Self> {
        check_spec(network.spec(), &scheme)?;
        Ok(Self { network, scheme })
    }

    /// Checkpoint bytes with the scheme stored in the metadata.
    pub fn to_checkpoint(&self, mut meta: CheckpointMeta) -> Result<Vec<u8>> {
        meta.labels = Some(self.scheme.clone());
        encode_checkpoint(&self.network, &meta)
    }

    pub fn from_checkpoint(bytes: &[u8]) -> Result<(Self, CheckpointMeta)> {
        let (network, meta) = decode_checkpoint(bytes, None)?;
        let scheme = meta
            .labels
            .clone()
            .ok_or_else(|| Error::Config("checkpoint carries no attribute scheme".into()))?;
        Ok((Self::new(network, scheme)?, meta))
    }

    pub fn load(path: &Path) -> Result<(Self, CheckpointMeta)> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint(&bytes)
    }
}

/// Fewest examples per label `train_attribute_model` accepts.
pub const MIN_EXAMPLES_PER_LABEL: usize = 2;

/// Trains a fresh network on `(feature, label index)` pairs.
pub fn train_attribute_model(
    examples: &[(FeatureVector, usize)],
    spec: &NetworkSpec,
    scheme: &AttributeScheme,
    config: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<(AttributeModel, History)> {
    fit_attribute_model(examples, spec, scheme, config, MIN_EXAMPLES_PER_LABEL, observer)
}

/// [`train_attribute_model`] with a caller-chosen per-label minimum. The
/// k-fold runner uses 1, since its fold sizes are fixed by the protocol.
pub fn fit_attribute_model(
    examples: &[(FeatureVector, usize)],
    spec: &NetworkSpec,
    scheme: &AttributeScheme,
    config: &TrainConfig,
    min_per_label: usize,
    observer: &mut dyn TrainObserver,
) -> Result<(AttributeModel, History)> {
    check_spec(spec, scheme)?;
    let mut counts = vec![0usize; scheme.class_count()];
    for (i, (f, label)) in examples.iter().enumerate() {
        let name = scheme
            .labels
            .get(*label)
            .ok_or_else(|| Error::InvalidArgument(format!("example {i} has label index {label} outside the scheme")))?;
        if f.planes.shape() != spec.input_shape {
            return Err(Error::Shape(format!(
                "feature `{}` for label `{name}` has shape {:?}, network expects {:?}",
                f.image_id,
                f.planes.shape(),
                spec.input_shape
            )));
        }
        counts[*label] += 1;
    }
    let min = min_per_label.max(1);
    if let Some((label, &n)) = counts.iter().enumerate().find(|(_, &n)| n < min) {
        return Err(Error::InvalidArgument(format!(
            "label `{}` has {n} training example(s); at least {min} are required",
            scheme.labels[label]
        )));
    }
    let data: Vec<_> = examples.iter().map(|(f, l)| (f.planes.clone(), *l)).collect();
    let mut network = Network::init(spec, config.seed)?;
    let history = train(&mut network, &data, config, observer)?;
    Ok((
        AttributeModel {
            network,
            scheme: scheme.clone(),
        },
        history,
    ))
}

/// Softmax over the scheme's labels; ties resolve to the lower index.
pub fn classify(model: &AttributeModel, feature: &FeatureVector) -> Result<Classification> {
    if feature.planes.shape() != model.network.spec().input_shape {
        return Err(Error::Shape(format!(
            "feature shape {:?} does not match model input {:?}",
            feature.planes.shape(),
            model.network.spec().input_shape
        )));
    }
    let logits = model.network.forward(&feature.planes)?;
    let probabilities = softmax(logits.data());
    let label = argmax(&probabilities);
    Ok(Classification {
        label,
        name: model.scheme.labels[label].clone(),
        probabilities,
    })
}
