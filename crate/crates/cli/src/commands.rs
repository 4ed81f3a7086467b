use std::fs;
use std::path::{Path, PathBuf};

use faceparse::attrclass::{build_feature_vector, classify, train_attribute_model, AttributeModel, FeatureVector};
use faceparse::checksum::digest64_hex;
use faceparse::dataio::{load_dataset, load_image, load_manifest, normalize_illumination, write_synthetic, Dataset, DatasetManifest};
use faceparse::evalkit::{
    dataset_labels, emit_report, permute_labels, render_importance, run_attribute_stage, run_kfold, KfoldOptions, Report,
    IMPORTANCE_FILE,
};
use faceparse::faceseg::{
    export_pms, load_pms_sidecar, segment, train_segmentation, ProbabilityMaps, SegExample, SIDECAR_FILE,
};
use faceparse::importance::{extract_summary, importance_report, train_forest};
use faceparse::netkit::{encode_checkpoint, load_checkpoint, write_atomic, CheckpointMeta, Network, NoObserver};
use faceparse::profile::Profile;
use faceparse::rng::derive_seed;
use faceparse::tensor::Tensor;
use faceparse::{Error, Result};
use serde::Serialize;

use crate::args::*;
use crate::record::RunRecord;
use crate::CliError;

pub const SEG_MODEL_FILE: &str = "seg.fpkt";
pub const ATTR_MODEL_FILE: &str = "attr.fpkt";
pub const CLASSIFICATION_FILE: &str = "classification.json";
pub const IMPORTANCE_JSON: &str = "importance.json";

const PERMUTATION_STREAM: u64 = 0x9E7;

pub fn dispatch(cli: &Cli) -> std::result::Result<(), CliError> {
    let profile = Profile::resolve(&cli.profile)?;
    profile.validate()?;
    let mut record = RunRecord::new(cli.seed, &cli.command, &profile);
    if Path::new(&cli.profile).is_file() {
        record.input_file(Path::new(&cli.profile))?;
    }
    let out = &cli.out;
    match &cli.command {
        Command::Serve(args) => return crate::serve::run(args).map_err(Into::into),
        Command::Segment(args) if args.image.is_none() && args.data.is_none() => {
            return Err(CliError::Usage("segment needs --image or --data".into()))
        }
        _ => {}
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let outputs = match &cli.command {
        Command::Synth(a) => synth(a, cli.seed, &profile, out, &mut record)?,
        Command::TrainSeg(a) => train_seg(a, cli.seed, &profile, out, &mut record)?,
        Command::Segment(a) => segment_cmd(a, &profile, out, &mut record)?,
        Command::TrainAttr(a) => train_attr(a, cli.seed, &profile, out, &mut record)?,
        Command::Classify(a) => classify_cmd(a, &profile, out, &mut record)?,
        Command::Importance(a) => importance(a, cli.seed, &profile, out, &mut record)?,
        Command::Kfold(a) => kfold(a, cli.seed, &profile, out, &mut record)?,
        Command::Serve(_) => unreachable!(),
    };
    record.output_files(out, &outputs)?;
    record.write(out)?;
    Ok(())
}

fn load_data(path: &Path, record: &mut RunRecord) -> Result<(DatasetManifest, Dataset)> {
    let manifest = load_manifest(path)?;
    record.input_manifest(&manifest)?;
    let data = load_dataset(&manifest)?;
    Ok((manifest, data))
}

fn preprocess(profile: &Profile, image: &Tensor<f64>) -> Result<Tensor<f64>> {
    if profile.segmentation.normalize_illumination {
        normalize_illumination(image)
    } else {
        Ok(image.clone())
    }
}

struct SegModel {
    network: Network<f64>,
    digest: String,
}

fn load_seg_model(path: &Path, profile: &Profile, record: &mut RunRecord) -> Result<SegModel> {
    record.input_file(path)?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (network, _) = load_checkpoint(path, Some(&profile.segmentation.network))?;
    Ok(SegModel {
        network,
        digest: digest64_hex(&bytes),
    })
}

fn segment_one(model: &SegModel, profile: &Profile, image: &Tensor<f64>, id: &str) -> Result<ProbabilityMaps> {
    let image = preprocess(profile, image)?;
    Ok(segment(&model.network, &image, &profile.segmentation.patch)?.with_provenance(&model.digest, id))
}

fn write_output(path: PathBuf, bytes: &[u8]) -> Result<PathBuf> {
    write_atomic(&path, bytes)?;
    Ok(path)
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn synth(a: &SynthArgs, seed: u64, profile: &Profile, out: &Path, record: &mut RunRecord) -> Result<Vec<PathBuf>> {
    let mut config = profile.synth.clone();
    config.seed = seed;
    if let Some(size) = a.size {
        config.size = size;
    }
    record.seed("synth", seed);
    let faces = faceparse::dataio::generate_synthetic(&config, a.n)?;
    let manifest = write_synthetic(&config, &faces, out)?;
    let mut written = vec![out.join(faceparse::dataio::MANIFEST_FILE)];
    for e in &manifest.entries {
        written.push(manifest.image_path(e));
        written.extend(manifest.mask_path(e));
    }
    println!("wrote {} faces to {}", faces.len(), out.display());
    Ok(written)
}

fn train_seg(a: &TrainSegArgs, seed: u64, profile: &Profile, out: &Path, record: &mut RunRecord) -> Result<Vec<PathBuf>> {
    let (_, data) = load_data(&a.data, record)?;
    let images = data.images.iter().map(|i| preprocess(profile, i)).collect::<Result<Vec<_>>>()?;
    let examples: Vec<SegExample> = (0..data.len())
        .filter_map(|i| {
            data.masks[i].as_ref().map(|mask| SegExample {
                id: &data.ids[i],
                image: &images[i],
                mask,
            })
        })
        .collect();
    let seg = &profile.segmentation;
    let mut config = seg.train.clone();
    config.seed = seed;
    if let Some(epochs) = a.epochs {
        config.epochs = epochs;
    }
    record.seed("train", seed);
    let trained = train_segmentation(&examples, &seg.network, &seg.patch, seg.per_class_quota, &config, &mut NoObserver)?;
    let meta = CheckpointMeta {
        model_id: "segmentation".into(),
        config: Some(config),
        epoch: trained.history.epochs.len(),
        seed,
        labels: None,
    };
    let path = write_output(out.join(SEG_MODEL_FILE), &encode_checkpoint(&trained.model, &meta)?)?;
    if let Some(last) = trained.history.epochs.last() {
        println!("trained on {} images: final loss {:.4}, accuracy {:.4}", examples.len(), last.mean_loss, last.accuracy);
    }
    Ok(vec![path])
}

fn segment_cmd(a: &SegmentArgs, profile: &Profile, out: &Path, record: &mut RunRecord) -> Result<Vec<PathBuf>> {
    let model = load_seg_model(&a.model, profile, record)?;
    if let Some(path) = &a.image {
        record.input_file(path)?;
        let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let pms = segment_one(&model, profile, &load_image(path)?, &id)?;
        return export_pms(&pms, out);
    }
    let data_path = a.data.as_ref().expect("checked by dispatch");
    let (_, data) = load_data(data_path, record)?;
    let mut written = Vec::new();
    for (id, image) in data.ids.iter().zip(&data.images) {
        let pms = segment_one(&model, profile, image, id)?;
        written.extend(export_pms(&pms, &out.join(id))?);
    }
    println!("segmented {} images", data.len());
    Ok(written)
}

fn features(model: &SegModel, profile: &Profile, data: &Dataset, rows: &[usize]) -> Result<Vec<FeatureVector>> {
    let [h, w] = profile.attribute.feature_size;
    rows.iter()
        .map(|&i| build_feature_vector(&segment_one(model, profile, &data.images[i], &data.ids[i])?, h, w))
        .collect()
}

fn train_attr(a: &TrainAttrArgs, seed: u64, profile: &Profile, out: &Path, record: &mut RunRecord) -> Result<Vec<PathBuf>> {
    let (_, data) = load_data(&a.data, record)?;
    let model = load_seg_model(&a.seg_model, profile, record)?;
    let (labels, scheme) = dataset_labels(&data)?;
    let rows: Vec<usize> = (0..data.len()).collect();
    let examples: Vec<(FeatureVector, usize)> = features(&model, profile, &data, &rows)?.into_iter().zip(labels).collect();
    let spec = profile.attribute_network(scheme.class_count())?;
    let mut config = profile.attribute.train.clone();
    config.seed = seed;
    if let Some(epochs) = a.epochs {
        config.epochs = epochs;
    }
    record.seed("train", seed);
    let (trained, history) = train_attribute_model(&examples, &spec, &scheme, &config, &mut NoObserver)?;
    let meta = CheckpointMeta {
        model_id: "attribute".into(),
        config: Some(config),
        epoch: history.epochs.len(),
        seed,
        labels: None,
    };
    let path = write_output(out.join(ATTR_MODEL_FILE), &trained.to_checkpoint(meta)?)?;
    if let Some(last) = history.epochs.last() {
        println!("trained on {} images: final loss {:.4}, accuracy {:.4}", examples.len(), last.mean_loss, last.accuracy);
    }
    Ok(vec![path])
}

#[derive(Serialize)]
struct ClassificationOut<'a> {
    image_id: &'a str,
    label: &'a str,
    index: usize,
    probabilities: Vec<LabelProbability<'a>>,
}

#[derive(Serialize)]
struct LabelProbability<'a> {
    label: &'a str,
    probability: f64,
}

fn classify_cmd(a: &ClassifyArgs, profile: &Profile, out: &Path, record: &mut RunRecord) -> Result<Vec<PathBuf>> {
    record.input_file(&a.model)?;
    let (model, _) = AttributeModel::load(&a.model)?;
    let pms = match (&a.pms, &a.image, &a.seg_model) {
        (Some(p), _, _) => {
            let file = if p.is_dir() { p.join(SIDECAR_FILE) } else { p.clone() };
            record.input_file(&file)?;
            let id = file.parent().and_then(Path::file_name).map(|s| s.to_string_lossy().into_owned());
            load_pms_sidecar(&file)?.with_provenance("", id.unwrap_or_default())
        }
        (None, Some(image), Some(seg)) => {
            let seg = load_seg_model(seg, profile, record)?;
            record.input_file(image)?;
            let id = image.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            segment_one(&seg, profile, &load_image(image)?, &id)?
        }
        _ => return Err(Error::Config("classify needs --pms, or --image with --seg-model".into())),
    };
    let [h, w] = profile.attribute.feature_size;
    let result = classify(&model, &build_feature_vector(&pms, h, w)?)?;
    let body = ClassificationOut {
        image_id: &pms.image_id,
        label: &result.name,
        index: result.label,
        probabilities: model
            .scheme
            .labels
            .iter()
            .zip(&result.probabilities)
            .map(|(label, &probability)| LabelProbability { label, probability })
            .collect(),
    };
    println!("{}", result.name);
    Ok(vec![write_output(out.join(CLASSIFICATION_FILE), &json_bytes(&body)?)?])
}

fn importance(a: &ImportanceArgs, seed: u64, profile: &Profile, out: &Path, record: &mut RunRecord) -> Result<Vec<PathBuf>> {
    let (_, data) = load_data(&a.data, record)?;
    let model = load_seg_model(&a.seg_model, profile, record)?;
    let (labels, _) = dataset_labels(&data)?;
    let mut x = Vec::with_capacity(data.len());
    for (id, image) in data.ids.iter().zip(&data.images) {
        x.push(extract_summary(&segment_one(&model, profile, image, id)?, 0).values.to_vec());
    }
    let mut config = profile.forest.clone();
    config.seed = seed;
    record.seed("forest", seed);
    let forest = train_forest(&x, &labels, &config)?;
    let mut report = importance_report(&forest);
    report.oob_accuracy = forest.oob_accuracy(&x, &labels);
    println!("ranking: {}", report.ranking.join(" > "));
    let chart = faceparse::dataio::encode_rgb_png(&render_importance(&report))?;
    Ok(vec![
        write_output(out.join(IMPORTANCE_JSON), &json_bytes(&report)?)?,
        write_output(out.join(IMPORTANCE_FILE), &chart)?,
    ])
}

fn kfold(a: &KfoldArgs, seed: u64, profile: &Profile, out: &Path, record: &mut RunRecord) -> Result<Vec<PathBuf>> {
    let (_, data) = load_data(&a.data, record)?;
    let mut opts = KfoldOptions::new(a.k, seed);
    opts.shared_seg_model = a.shared_seg_model;
    record.seed("kfold", seed);
    let outcome = run_kfold(&data, profile, &opts)?;
    let mut report = Report::from_outcome(&outcome);
    if a.permutation_control {
        let (labels, scheme) = dataset_labels(&data)?;
        let perm_seed = derive_seed(seed, PERMUTATION_STREAM);
        record.seed("permutation", perm_seed);
        let shuffled = permute_labels(&labels, perm_seed);
        let control = run_attribute_stage(&data, &shuffled, &scheme, profile, &outcome.seg_stage, &opts)?;
        report.permutation_control = Some(control.metrics);
    }
    let c = &report.classification;
    println!("attribute accuracy {:.4} (fold mean {:.4} +/- {:.4})", c.accuracy, c.mean_accuracy, c.std_accuracy);
    if let Some(seg) = &report.segmentation {
        println!("segmentation pixel accuracy {:.4}", seg.accuracy);
    }
    if let Some(p) = &report.permutation_control {
        println!("permutation control accuracy {:.4}", p.accuracy);
    }
    emit_report(&report, out)
}
