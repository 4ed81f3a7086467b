use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::metrics::{ClsMetrics, Confusion, FoldScore, SegMetrics};
use crate::attrclass::{build_feature_vector, classify, fit_attribute_model, AttributeScheme, FeatureVector};
use crate::checksum::digest64_hex;
use crate::dataio::{make_folds, normalize_illumination, Dataset, FoldPlan};
use crate::error::{Error, Result};
use crate::faceseg::{argmax_mask, segment, train_segmentation, SegExample, SegTraining};
use crate::importance::{extract_summary, importance_report, train_forest, ImportanceReport, SUMMARY_LEN};
use crate::netkit::{encode_checkpoint, CheckpointMeta, NoObserver};
use crate::profile::Profile;
use crate::rng::{derive_seed, SeededRng};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KfoldOptions {
    pub k: usize,
    pub seed: u64,
    /// Train one segmentation model on every masked image and reuse it in
    /// all folds. Held-out images then influence segmentation training.
    pub shared_seg_model: bool,
}

impl KfoldOptions {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            shared_seg_model: false,
        }
    }
}

const FOLD_STREAM: u64 = 1;
const FOREST_STREAM: u64 = 2;
const SEG_STREAM: u64 = 0x5E6;
const ATTR_STREAM: u64 = 0xA77;

fn fold_seed(base: u64, stream: u64, fold: usize) -> u64 {
    derive_seed(derive_seed(base, stream), fold as u64)
}

fn id_hash(id: &str) -> String {
    digest64_hex(id.as_bytes())
}

/// Digests of the image ids each training stage saw, next to the fold's
/// held-out ids.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldLog {
    pub fold: usize,
    pub held_out: Vec<String>,
    pub seg_training: Vec<String>,
    pub attr_training: Vec<String>,
}

impl FoldLog {
    /// No held-out id appears in any training log.
    pub fn is_clean(&self) -> bool {
        let held: HashSet<&String> = self.held_out.iter().collect();
        !self.seg_training.iter().chain(&self.attr_training).any(|h| held.contains(h))
    }
}

/// Segmentation results of one fold.
#[derive(Clone, Debug)]
pub struct FoldSegmentation {
    pub fold: usize,
    pub model_digest: String,
    pub seg_training: Vec<usize>,
    pub held_out: Vec<usize>,
    /// Feature vector of every entry, computed with this fold's model.
    pub features: Vec<FeatureVector>,
    /// Summary scalars of each held-out entry, in `held_out` order.
    pub summaries: Vec<[f64; SUMMARY_LEN]>,
    /// Held-out pixels with ground truth; `None` when no held-out mask exists.
    pub confusion: Option<Confusion>,
    pub final_loss: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SegStage {
    pub plan: FoldPlan,
    pub folds: Vec<FoldSegmentation>,
}

impl SegStage {
    pub fn metrics(&self) -> Option<SegMetrics> {
        let mut total: Option<Confusion> = None;
        for c in self.folds.iter().filter_map(|f| f.confusion.as_ref()) {
            total.get_or_insert_with(|| Confusion::new(c.k())).merge(c);
        }
        total.map(SegMetrics::from_confusion)
    }
}

fn stage_err(stage: &'static str, fold: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::Stage {
        stage,
        fold,
        source: Box::new(e),
    }
}

fn preprocess(data: &Dataset, profile: &Profile) -> Result<Vec<Tensor<f64>>> {
    if profile.segmentation.normalize_illumination {
        data.images.iter().map(normalize_illumination).collect()
    } else {
        Ok(data.images.clone())
    }
}

fn fit_segmenter(
    data: &Dataset,
    images: &[Tensor<f64>],
    rows: &[usize],
    profile: &Profile,
    seed: u64,
) -> Result<SegTraining> {
    let examples: Vec<SegExample> = rows
        .iter()
        .filter_map(|&i| {
            data.masks[i].as_ref().map(|mask| SegExample {
                id: &data.ids[i],
                image: &images[i],
                mask,
            })
        })
        .collect();
    if examples.is_empty() {
        return Err(Error::InvalidArgument("no masked images to train segmentation on".into()));
    }
    let seg = &profile.segmentation;
    let mut config = seg.train.clone();
    config.seed = seed;
    train_segmentation(&examples, &seg.network, &seg.patch, seg.per_class_quota, &config, &mut NoObserver)
}

/// Trains a segmentation model per fold (or one shared model), segments
/// every entry with it, and keeps feature vectors, held-out summaries and
/// held-out pixel tallies.
pub fn run_segmentation_stage(data: &Dataset, profile: &Profile, plan: &FoldPlan, opts: &KfoldOptions) -> Result<SegStage> {
    let images = preprocess(data, profile)?;
    let [fh, fw] = profile.attribute.feature_size;
    let shared = if opts.shared_seg_model {
        let all: Vec<usize> = (0..data.len()).collect();
        Some(fit_segmenter(data, &images, &all, profile, derive_seed(opts.seed, SEG_STREAM)).map_err(stage_err("segmentation training", 0))?)
    } else {
        None
    };
    let mut folds = Vec::with_capacity(plan.k);
    for fold in 0..plan.k {
        let held_out = plan.test_indices(fold);
        let train_rows = if opts.shared_seg_model {
            (0..data.len()).collect()
        } else {
            plan.train_indices(fold)
        };
        let seg_training: Vec<usize> = train_rows.into_iter().filter(|&i| data.masks[i].is_some()).collect();
        let owned;
        let trained = match &shared {
            Some(t) => t,
            None => {
                owned = fit_segmenter(data, &images, &seg_training, profile, fold_seed(opts.seed, SEG_STREAM, fold))
                    .map_err(stage_err("segmentation training", fold))?;
                &owned
            }
        };
        let model_bytes = encode_checkpoint(&trained.model, &CheckpointMeta::default())?;
        let model_digest = digest64_hex(&model_bytes);
        let mut features = Vec::with_capacity(data.len());
        let mut summaries = Vec::with_capacity(held_out.len());
        let mut confusion: Option<Confusion> = None;
        for (i, image) in images.iter().enumerate() {
            let pms = segment(&trained.model, image, &profile.segmentation.patch)
                .map_err(stage_err("segmentation", fold))?
                .with_provenance(&model_digest, &data.ids[i]);
            features.push(build_feature_vector(&pms, fh, fw).map_err(stage_err("feature extraction", fold))?);
            if plan.assignment[i] == fold {
                summaries.push(extract_summary(&pms, 0).values);
                if let Some(truth) = &data.masks[i] {
                    let c = super::metrics::seg_confusion(&argmax_mask(&pms), truth)?;
                    confusion.get_or_insert_with(|| Confusion::new(c.k())).merge(&c);
                }
            }
        }
        log::info!(
            "fold {fold}: segmentation pixel accuracy {:?}",
            confusion.as_ref().and_then(Confusion::accuracy)
        );
        folds.push(FoldSegmentation {
            fold,
            model_digest,
            seg_training,
            held_out,
            features,
            summaries,
            confusion,
            final_loss: trained.history.epochs.last().map(|e| e.mean_loss),
        });
    }
    Ok(SegStage {
        plan: plan.clone(),
        folds,
    })
}

#[derive(Clone, Debug)]
pub struct AttributeStage {
    pub metrics: ClsMetrics,
    pub logs: Vec<FoldLog>,
    /// Held-out prediction for every entry.
    pub predictions: Vec<usize>,
}

/// Trains and evaluates the attribute classifier of every fold on the
/// feature vectors of a segmentation stage.
pub fn run_attribute_stage(
    data: &Dataset,
    labels: &[usize],
    scheme: &AttributeScheme,
    profile: &Profile,
    seg: &SegStage,
    opts: &KfoldOptions,
) -> Result<AttributeStage> {
    if labels.len() != data.len() {
        return Err(Error::InvalidArgument(format!("{} labels for {} entries", labels.len(), data.len())));
    }
    let spec = profile.attribute_network(scheme.class_count())?;
    let mut confusion = Confusion::new(scheme.class_count());
    let mut scores = Vec::new();
    let mut logs = Vec::new();
    let mut predictions = vec![0; data.len()];
    for fs in &seg.folds {
        let fold = fs.fold;
        let train_rows = seg.plan.train_indices(fold);
        let examples: Vec<(FeatureVector, usize)> =
            train_rows.iter().map(|&i| (fs.features[i].clone(), labels[i])).collect();
        let mut config = profile.attribute.train.clone();
        config.seed = fold_seed(opts.seed, ATTR_STREAM, fold);
        let (model, _) = fit_attribute_model(&examples, &spec, scheme, &config, 1, &mut NoObserver)
            .map_err(stage_err("attribute training", fold))?;
        let mut fold_conf = Confusion::new(scheme.class_count());
        for &i in &fs.held_out {
            let out = classify(&model, &fs.features[i]).map_err(stage_err("classification", fold))?;
            fold_conf.add(labels[i], out.label);
            predictions[i] = out.label;
        }
        let accuracy = fold_conf.accuracy().unwrap_or(0.0);
        log::info!("fold {fold}: attribute accuracy {accuracy:.4}");
        scores.push(FoldScore {
            fold,
            test_count: fs.held_out.len(),
            accuracy,
            seg_accuracy: fs.confusion.as_ref().and_then(Confusion::accuracy),
        });
        confusion.merge(&fold_conf);
        logs.push(FoldLog {
            fold,
            held_out: fs.held_out.iter().map(|&i| id_hash(&data.ids[i])).collect(),
            seg_training: fs.seg_training.iter().map(|&i| id_hash(&data.ids[i])).collect(),
            attr_training: train_rows.iter().map(|&i| id_hash(&data.ids[i])).collect(),
        });
    }
    Ok(AttributeStage {
        metrics: ClsMetrics::new(confusion, &scheme.labels, scores),
        logs,
        predictions,
    })
}

/// Forest importance over the held-out summaries of every fold.
pub fn held_out_importance(seg: &SegStage, labels: &[usize], profile: &Profile, seed: u64) -> Result<ImportanceReport> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for fs in &seg.folds {
        for (&i, s) in fs.held_out.iter().zip(&fs.summaries) {
            x.push(s.to_vec());
            y.push(labels[i]);
        }
    }
    let mut config = profile.forest.clone();
    config.seed = derive_seed(seed, FOREST_STREAM);
    let forest = train_forest(&x, &y, &config)?;
    let mut report = importance_report(&forest);
    report.oob_accuracy = forest.oob_accuracy(&x, &y);
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct KfoldOutcome {
    pub plan: FoldPlan,
    pub classification: ClsMetrics,
    pub segmentation: Option<SegMetrics>,
    pub importance: Option<ImportanceReport>,
    pub logs: Vec<FoldLog>,
    pub seg_stage: SegStage,
}

pub fn dataset_labels(data: &Dataset) -> Result<(Vec<usize>, AttributeScheme)> {
    let scheme = data
        .scheme
        .clone()
        .ok_or_else(|| Error::InvalidArgument("dataset has no attribute scheme".into()))?;
    let labels = data
        .labels
        .iter()
        .zip(&data.ids)
        .map(|(l, id)| l.ok_or_else(|| Error::InvalidArgument(format!("entry `{id}` has no label"))))
        .collect::<Result<Vec<_>>>()?;
    Ok((labels, scheme))
}

/// The full protocol: stratified folds, per-fold segmentation, feature
/// vectors, attribute training and held-out evaluation, then forest
/// importance on held-out probability-map summaries.
pub fn run_kfold(data: &Dataset, profile: &Profile, opts: &KfoldOptions) -> Result<KfoldOutcome> {
    profile.validate()?;
    let (labels, scheme) = dataset_labels(data)?;
    let plan = make_folds(
        &labels.iter().map(|&l| Some(l)).collect::<Vec<_>>(),
        opts.k,
        derive_seed(opts.seed, FOLD_STREAM),
    )?;
    let seg = run_segmentation_stage(data, profile, &plan, opts)?;
    let attr = run_attribute_stage(data, &labels, &scheme, profile, &seg, opts)?;
    if !opts.shared_seg_model {
        if let Some(bad) = attr.logs.iter().find(|l| !l.is_clean()) {
            return Err(Error::InvalidArgument(format!("fold {} leaked held-out images into training", bad.fold)));
        }
    }
    let importance = Some(held_out_importance(&seg, &labels, profile, opts.seed)?);
    Ok(KfoldOutcome {
        plan,
        classification: attr.metrics,
        segmentation: seg.metrics(),
        importance,
        logs: attr.logs,
        seg_stage: seg,
    })
}

/// Seeded shuffle of a label vector, for permutation controls.
pub fn permute_labels(labels: &[usize], seed: u64) -> Vec<usize> {
    let mut out = labels.to_vec();
    SeededRng::new(seed).shuffle(&mut out);
    out
}
