use rayon::prelude::*;

use super::mask::LabelMask;
use super::palette::CLASS_COUNT;
use super::patches::{sample_training_patches, PaddedImage, PatchPlan, SamplingReport};
use super::pms::ProbabilityMaps;
use crate::checksum::digest64;
use crate::error::{Error, Result};
use crate::netkit::{train, History, Network, NetworkSpec, TrainConfig, TrainObserver};
use crate::rng::derive_seed;
use crate::tensor::{softmax, Tensor};

fn check_model(model: &Network<f64>, image: &Tensor<f64>, plan: &PatchPlan) -> Result<()> {
    if model.class_count() != CLASS_COUNT {
        return Err(Error::InvalidArgument(format!(
            "segmentation model has {} classes, expected {CLASS_COUNT}",
            model.class_count()
        )));
    }
    let (c, _, _) = image.chw()?;
    let want = [c, plan.size, plan.size];
    if model.spec().input_shape != want {
        return Err(Error::Shape(format!(
            "model input {:?} does not match {:?} patches of this image",
            model.spec().input_shape,
            want
        )));
    }
    Ok(())
}

fn row_probabilities(model: &Network<f64>, padded: &PaddedImage, y: usize) -> Result<Vec<[f64; CLASS_COUNT]>> {
    let w = padded.width();
    let mut buf = Vec::new();
    for x in 0..w {
        padded.write_patch(x, y, &mut buf);
    }
    let mut shape = vec![w];
    shape.extend_from_slice(&model.spec().input_shape);
    let logits = model.forward(&Tensor::new(&shape, buf)?)?;
    Ok(logits
        .data()
        .chunks_exact(CLASS_COUNT)
        .map(|z| softmax(z).try_into().expect("seven logits"))
        .collect())
}

fn assemble(width: usize, height: usize, rows: Vec<Vec<[f64; CLASS_COUNT]>>) -> Result<ProbabilityMaps> {
    let area = width * height;
    let mut planes = vec![0.0; CLASS_COUNT * area];
    for (y, row) in rows.iter().enumerate() {
        for (x, probs) in row.iter().enumerate() {
            for (c, &p) in probs.iter().enumerate() {
                planes[c * area + y * width + x] = p;
            }
        }
    }
    ProbabilityMaps::new(width, height, planes)
}

/// Dense sliding-window inference: each pixel's probability vector is the
/// softmax output for the patch centered on it. Rows are evaluated as
/// batches, in parallel; the result equals [`segment_naive`] bit for bit.
pub fn segment(model: &Network<f64>, image: &Tensor<f64>, plan: &PatchPlan) -> Result<ProbabilityMaps> {
    check_model(model, image, plan)?;
    let padded = PaddedImage::new(image, plan)?;
    let rows = (0..padded.height())
        .into_par_iter()
        .map(|y| row_probabilities(model, &padded, y))
        .collect::<Result<Vec<_>>>()?;
    assemble(padded.width(), padded.height(), rows)
}

/// One forward pass per pixel. Reference for [`segment`].
pub fn segment_naive(model: &Network<f64>, image: &Tensor<f64>, plan: &PatchPlan) -> Result<ProbabilityMaps> {
    check_model(model, image, plan)?;
    let padded = PaddedImage::new(image, plan)?;
    let mut rows = Vec::with_capacity(padded.height());
    for y in 0..padded.height() {
        let mut row = Vec::with_capacity(padded.width());
        for x in 0..padded.width() {
            let logits = model.forward(&padded.patch(x, y))?;
            row.push(softmax(logits.data()).try_into().expect("seven logits"));
        }
        rows.push(row);
    }
    assemble(padded.width(), padded.height(), rows)
}

/// One labeled image for segmentation training.
#[derive(Clone, Copy, Debug)]
pub struct SegExample<'a> {
    pub id: &'a str,
    pub image: &'a Tensor<f64>,
    pub mask: &'a LabelMask,
}

#[derive(Clone, Debug)]
pub struct SegTraining {
    pub model: Network<f64>,
    pub history: History,
    pub sampling: Vec<(String, SamplingReport)>,
}

/// Samples class-balanced patches from every example and trains a fresh
/// network. Patch centers for an image depend only on `config.seed` and the
/// image id, so adding or removing other images leaves them unchanged.
pub fn train_segmentation(
    examples: &[SegExample<'_>],
    spec: &NetworkSpec,
    plan: &PatchPlan,
    quota: usize,
    config: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<SegTraining> {
    if spec.class_count != CLASS_COUNT {
        return Err(Error::Config(format!(
            "segmentation network must have {CLASS_COUNT} classes, not {}",
            spec.class_count
        )));
    }
    let mut data = Vec::new();
    let mut sampling = Vec::new();
    for ex in examples {
        let seed = derive_seed(config.seed, digest64(ex.id.as_bytes()));
        let sample = sample_training_patches(ex.image, ex.mask, plan, seed, quota)?;
        data.extend(sample.items);
        sampling.push((ex.id.to_string(), sample.report));
    }
    let mut model = Network::init(spec, config.seed)?;
    check_model(&model, examples.first().map(|e| e.image).ok_or_else(|| {
        Error::InvalidArgument("no segmentation training images".into())
    })?, plan)?;
    let history = train(&mut model, &data, config, observer)?;
    Ok(SegTraining {
        model,
        history,
        sampling,
    })
}
