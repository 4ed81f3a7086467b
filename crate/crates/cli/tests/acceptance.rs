//! Acceptance criteria, one `PASS`/`FAIL` line each. Exits non-zero when
//! any criterion fails.

use std::fs;
use std::ops::ControlFlow;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use faceparse::dataio::{decode_mask, encode_mask_png, generate_synthetic, SynthConfig};
use faceparse::faceseg::{load_pms_sidecar, pm_file_name, LabelMask, ProbabilityMaps, CLASS_COUNT, SIDECAR_FILE};
use faceparse::netkit::{
    decode_checkpoint, encode_checkpoint, toy_network, train, CheckpointMeta, LabeledNetwork, MomentumSgd,
    Network, TrainConfig,
};
use faceparse::profile::Profile;
use faceparse::rng::SeededRng;
use faceparse::tensor::gradcheck::fragments::{random_projection, Conv, Dense, MaxPool, Relu, SoftmaxCe};
use faceparse::tensor::gradcheck::{gradient_check, Differentiable, GradCheckOptions};
use faceparse::tensor::{ConvGeometry, Padding, Tensor};

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn faceparse(dir: &Path, args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_faceparse"))
        .current_dir(dir)
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!("{args:?} exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

const DRAWS: u64 = 100;
const GRADIENT_BUDGET: Duration = Duration::from_secs(120);

fn random(shape: &[usize], rng: &mut SeededRng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.uniform(-1.0, 1.0)).unwrap()
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    let mut check = |frag: &mut dyn Differentiable, input: &Tensor<f64>, opts: &GradCheckOptions, what: String| -> Result<(), String> {
        let report = gradient_check(frag, input, opts).map_err(|e| e.to_string())?;
        worst = worst.max(report.max_rel_error());
        checks += 1;
        ensure(report.passed(), format!("{what}: relative error {:.2e}", report.max_rel_error())).map(|_| ())
    };
    let opts = GradCheckOptions::default();
    let mut rng = SeededRng::new(101);
    for draw in 0..DRAWS {
        let (c, f, k, s) = (1 + rng.below(3), 1 + rng.below(3), 1 + rng.below(3), 1 + rng.below(2));
        let geom = ConvGeometry::new((k, k), (s, s), Padding::new(rng.below(2), rng.below(2), rng.below(2), rng.below(2))).unwrap();
        let (h, w) = (k + rng.below(4), k + rng.below(4));
        let (oh, ow) = geom.output_hw(h, w).unwrap();
        let input = random(&[c, h, w], &mut rng);
        let mut frag = Conv {
            weights: random(&[f, c, k, k], &mut rng),
            bias: random(&[f], &mut rng),
            geom,
            projection: random_projection(f * oh * ow, draw),
        };
        check(&mut frag, &input, &opts, format!("conv draw {draw}"))?;

        let (n, m) = (1 + rng.below(10), 1 + rng.below(6));
        let input = random(&[n], &mut rng);
        let mut frag = Dense {
            weights: random(&[m, n], &mut rng),
            bias: random(&[m], &mut rng),
            projection: random_projection(m, draw),
        };
        check(&mut frag, &input, &opts, format!("dense draw {draw}"))?;

        let (k, s) = (2 + rng.below(2), 1 + rng.below(2));
        let geom = ConvGeometry::new((k, k), (s, s), Padding::new(0, rng.below(2), 0, rng.below(2))).unwrap();
        let (h, w) = (k + rng.below(4), k + rng.below(4));
        let (oh, ow) = geom.output_hw(h, w).unwrap();
        let c = 1 + rng.below(2);
        let input = random(&[c, h, w], &mut rng);
        let mut frag = MaxPool {
            geom,
            projection: random_projection(c * oh * ow, draw),
        };
        check(&mut frag, &input, &opts, format!("maxpool draw {draw}"))?;

        let n = 1 + rng.below(12);
        let input = Tensor::from_fn(&[n], |_| loop {
            let v = rng.uniform(-1.0, 1.0);
            if v.abs() > 1e-3 {
                break v;
            }
        })
        .unwrap();
        let mut frag = Relu {
            projection: random_projection(n, draw),
        };
        check(&mut frag, &input, &opts, format!("relu draw {draw}"))?;

        let logits = Tensor::from_fn(&[7], |_| rng.uniform(-3.0, 3.0)).unwrap();
        let mut frag = SoftmaxCe {
            true_class: rng.below(7),
        };
        check(&mut frag, &logits, &opts, format!("softmax draw {draw}"))?;
    }
    let shapes = [[3, 11, 11], [5, 12, 12], [3, 9, 10], [1, 7, 8]];
    for draw in 0..DRAWS {
        let shape = shapes[draw as usize % shapes.len()];
        let mut frag = LabeledNetwork {
            net: Network::init(&toy_network(shape, 7).resolve_padding().unwrap(), draw).unwrap(),
            class: rng.below(7),
        };
        let input = (0..100)
            .map(|_| random(&shape, &mut rng))
            .find(|x| frag.net.kink_margin(x).unwrap() > 2e-4)
            .ok_or_else(|| format!("network draw {draw}: no input clear of ReLU and pooling kinks"))?;
        let opts = GradCheckOptions {
            max_coords_per_block: Some(30),
            seed: draw,
            ..Default::default()
        };
        check(&mut frag, &input, &opts, format!("toy network draw {draw}"))?;
    }
    let elapsed = start.elapsed();
    ensure(
        elapsed < GRADIENT_BUDGET,
        format!("{checks} checks, max relative error {worst:.2e} (limit 1e-4), {:.1}s (limit 120s)", elapsed.as_secs_f64()),
    )
}

const TABLE_MAPS: [usize; 8] = [96, 96, 256, 256, 316, 316, 512, 512];
const TABLE_SIZES: [usize; 8] = [124, 62, 30, 15, 12, 6, 4, 2];

fn table_conformance() -> Outcome {
    let spec = Profile::paper_defaults().segmentation.network.resolve_padding().map_err(|e| e.to_string())?;
    let shapes = spec.infer_shapes().map_err(|e| e.to_string())?;
    let spatial: Vec<Vec<usize>> = shapes
        .iter()
        .zip(&spec.layers)
        .filter(|(_, l)| l.geometry().is_some())
        .map(|((_, s), _)| s.clone())
        .collect();
    let expected: Vec<Vec<usize>> = TABLE_MAPS.iter().zip(TABLE_SIZES).map(|(&m, s)| vec![m, s, s]).collect();
    ensure(spatial == expected, format!("layer outputs {spatial:?}"))
}

fn optimizer_conformance() -> Outcome {
    let (lr, mu, g, w0): (f64, f64, f64, f64) = (1e-5, 0.8, 2.5, -0.4);
    let mut opt = MomentumSgd::new(lr, mu);
    let mut w = [w0];
    let mut worst: f64 = 0.0;
    for t in 1..=10 {
        opt.step(&mut [&mut w], &[&[g]]);
        let geometric: f64 = (1..=t).map(|j| (1.0 - mu.powi(j)) / (1.0 - mu)).sum();
        worst = worst.max((w[0] - (w0 - lr * g * geometric)).abs());
    }
    ensure(worst <= 1e-12, format!("max deviation {worst:.1e} over 10 steps (limit 1e-12)"))
}

fn overfit() -> Outcome {
    let mut rng = SeededRng::new(7);
    let data: Vec<(Tensor<f64>, usize)> = (0..8)
        .map(|i| (Tensor::from_fn(&[3, 11, 11], |_| rng.uniform(0.0, 1.0)).unwrap(), i % 7))
        .collect();
    let profile = Profile::toy_defaults();
    let mut net = Network::init(&profile.segmentation.network, 1).map_err(|e| e.to_string())?;
    let config = TrainConfig {
        epochs: 500,
        batch_size: 8,
        ..profile.segmentation.train.clone()
    };
    let start = Instant::now();
    let mut reached = None;
    let mut last = f64::NAN;
    let mut observer = |step: usize, loss: f64| {
        last = loss;
        if loss < 0.01 {
            reached = Some(step);
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    };
    train(&mut net, &data, &config, &mut observer).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    match reached {
        Some(step) => ensure(elapsed < 60.0, format!("loss {last:.4} < 0.01 at step {step} of 500, {elapsed:.1}s")),
        None => Err(format!("loss {last:.4} after 500 steps")),
    }
}

struct EndToEnd {
    dir: tempfile::TempDir,
    elapsed: Duration,
}

fn run_end_to_end() -> Result<EndToEnd, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    faceparse(dir.path(), &["synth", "--n", "100", "--out", "data"])?;
    faceparse(dir.path(), &["kfold", "--data", "data", "--k", "10", "--permutation-control", "--out", "report"])?;
    Ok(EndToEnd {
        elapsed: start.elapsed(),
        dir,
    })
}

fn end_to_end(e2e: &Result<EndToEnd, String>) -> Outcome {
    let e2e = e2e.as_ref().map_err(Clone::clone)?;
    let m = json(&e2e.dir.path().join("report/metrics.json"));
    let folds = m["classification"]["folds"].as_array().unwrap();
    let seg: Vec<f64> = folds.iter().map(|f| f["seg_accuracy"].as_f64().unwrap()).collect();
    let seg_mean = seg.iter().sum::<f64>() / seg.len() as f64;
    let attr = m["classification"]["mean_accuracy"].as_f64().unwrap();
    let control = &m["permutation_control"];
    let labels = control["labels"].as_array().unwrap().len() as f64;
    let n = control["confusion"]["counts"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|r| r.as_array().unwrap())
        .map(|v| v.as_u64().unwrap())
        .sum::<u64>() as f64;
    let chance = 1.0 / labels;
    let sigma = (chance * (1.0 - chance) / n).sqrt();
    let perm = control["accuracy"].as_f64().unwrap();
    let minutes = e2e.elapsed.as_secs_f64() / 60.0;
    let detail = format!(
        "segmentation {seg_mean:.4} (>= 0.90), attribute {attr:.4} (>= 0.95), permutation {perm:.4} vs chance {chance:.2} \
         (3 sigma = {:.3}), {minutes:.1} min (<= 10)",
        3.0 * sigma
    );
    ensure(
        folds.len() == 10 && seg_mean >= 0.90 && attr >= 0.95 && (perm - chance).abs() <= 3.0 * sigma && minutes <= 10.0,
        detail,
    )
}

const MINOR: [&str; 5] = ["hair", "eyes", "brows", "nose", "mouth"];
const MAJOR: [&str; 2] = ["skin", "back"];

fn importance_ordering(e2e: &Result<EndToEnd, String>) -> Outcome {
    let e2e = e2e.as_ref().map_err(Clone::clone)?;
    let m = json(&e2e.dir.path().join("report/metrics.json"));
    let classes = m["importance"]["classes"].as_array().unwrap();
    let score = |names: &[&str]| -> f64 {
        classes
            .iter()
            .filter(|c| names.contains(&c["name"].as_str().unwrap()))
            .map(|c| c["score"].as_f64().unwrap())
            .sum()
    };
    let (minor, major) = (score(&MINOR), score(&MAJOR));
    ensure(
        minor > major,
        format!("{{hair, eyes, brows, nose, mouth}} {minor:.3} vs {{skin, back}} {major:.3}; ranking {}", m["importance"]["ranking"]),
    )
}

fn pm_invariants(e2e: &Result<EndToEnd, String>) -> Outcome {
    let e2e = e2e.as_ref().map_err(Clone::clone)?;
    let dir = e2e.dir.path();
    faceparse(dir, &["train-seg", "--data", "data", "--out", "seg"])?;
    faceparse(dir, &["segment", "--model", "seg/seg.fpkt", "--data", "data", "--out", "pms"])?;
    let mut images = 0;
    let mut worst_sum: f64 = 0.0;
    let mut mismatches = 0;
    let mut ids: Vec<PathBuf> = fs::read_dir(dir.join("pms"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_dir())
        .collect();
    ids.sort();
    for image_dir in ids {
        let pms = load_pms_sidecar(&image_dir.join(SIDECAR_FILE)).map_err(|e| e.to_string())?;
        for y in 0..pms.height() {
            for x in 0..pms.width() {
                worst_sum = worst_sum.max((pms.pixel(x, y).iter().sum::<f64>() - 1.0).abs());
            }
        }
        for c in 0..CLASS_COUNT {
            let gray = image::open(image_dir.join(pm_file_name(c))).map_err(|e| e.to_string())?.into_luma8();
            for (px, p) in gray.pixels().zip(pms.plane(c)) {
                mismatches += usize::from(px.0[0] != (255.0 * p).round() as u8);
            }
        }
        images += 1;
    }
    ensure(
        images == 100 && worst_sum <= 1e-9 && mismatches == 0,
        format!("{images} images: max |sum - 1| {worst_sum:.1e} (limit 1e-9), {mismatches} PNG pixels off round(255 p)"),
    )
}

const SMALL_PROFILE: &str = "small.toml";

fn run_every_subcommand(root: &Path) -> Result<(), String> {
    let mut p = Profile::toy_defaults();
    p.name = "small".into();
    p.segmentation.train.epochs = 2;
    p.attribute.feature_size = [8, 8];
    p.attribute.network = toy_network([5, 8, 8], 2);
    p.attribute.train.epochs = 5;
    p.forest.trees = 20;
    fs::write(root.join(SMALL_PROFILE), p.to_toml().unwrap()).unwrap();
    let steps: [&[&str]; 8] = [
        &["synth", "--n", "8", "--out", "data"],
        &["train-seg", "--data", "data", "--out", "seg"],
        &["segment", "--model", "seg/seg.fpkt", "--image", "data/images/face_0002.png", "--out", "pms"],
        &["segment", "--model", "seg/seg.fpkt", "--data", "data", "--out", "all"],
        &["train-attr", "--data", "data", "--seg-model", "seg/seg.fpkt", "--out", "attr"],
        &["classify", "--model", "attr/attr.fpkt", "--pms", "pms", "--out", "cls"],
        &["importance", "--data", "data", "--seg-model", "seg/seg.fpkt", "--out", "imp"],
        &["kfold", "--data", "data", "--k", "2", "--permutation-control", "--out", "report"],
    ];
    for step in steps {
        let mut args = step.to_vec();
        args.extend(["--seed", "11", "--profile", SMALL_PROFILE]);
        faceparse(root, &args)?;
    }
    Ok(())
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_every_subcommand(a.path())?;
    run_every_subcommand(b.path())?;
    let files = files_under(a.path());
    if files != files_under(b.path()) {
        return Err("the two runs wrote different file sets".into());
    }
    let differing: Vec<String> = files
        .iter()
        .filter(|f| fs::read(a.path().join(f)).unwrap() != fs::read(b.path().join(f)).unwrap())
        .map(|f| f.display().to_string())
        .collect();
    let kinds = ["fpkt", "fppm", "json", "png"]
        .iter()
        .map(|ext| format!("{} .{ext}", files.iter().filter(|f| f.extension().is_some_and(|e| e == *ext)).count()))
        .collect::<Vec<_>>()
        .join(", ");
    ensure(differing.is_empty(), format!("8 subcommand runs, {} files compared ({kinds}); differing: {differing:?}", files.len()))
}

fn round_trips() -> Outcome {
    let mut rng = SeededRng::new(3);
    for seed in 0..10 {
        let spec = toy_network([3, 11, 11], 7);
        let net: Network<f64> = Network::init(&spec, seed).unwrap();
        let meta = CheckpointMeta::default();
        let bytes = encode_checkpoint(&net, &meta).unwrap();
        let (back, _) = decode_checkpoint(&bytes, Some(&spec)).map_err(|e| e.to_string())?;
        if encode_checkpoint(&back, &meta).unwrap() != bytes {
            return Err(format!("checkpoint {seed} changed on round trip"));
        }

        let (w, h) = (1 + rng.below(20), 1 + rng.below(20));
        let area = w * h;
        let mut planes = vec![0.0; CLASS_COUNT * area];
        for p in 0..area {
            let raw: Vec<f64> = (0..CLASS_COUNT).map(|_| rng.next_f64()).collect();
            let total: f64 = raw.iter().sum();
            for (c, v) in raw.iter().enumerate() {
                planes[c * area + p] = v / total;
            }
        }
        let pms = ProbabilityMaps::new(w, h, planes).unwrap();
        let back = ProbabilityMaps::from_sidecar(&pms.to_sidecar().unwrap()).map_err(|e| e.to_string())?;
        if back.planes().iter().zip(pms.planes()).any(|(a, b)| a.to_bits() != b.to_bits()) {
            return Err(format!("sidecar {seed} changed on round trip"));
        }

        let mask = LabelMask::new(w, h, (0..area).map(|_| rng.below(CLASS_COUNT) as u8).collect()).unwrap();
        if decode_mask(&encode_mask_png(&mask).unwrap(), Path::new("mask.png")).map_err(|e| e.to_string())? != mask {
            return Err(format!("mask {seed} changed on round trip"));
        }
    }
    for face in generate_synthetic(&SynthConfig::default(), 4).unwrap() {
        if decode_mask(&encode_mask_png(&face.mask).unwrap(), Path::new("mask.png")).unwrap() != face.mask {
            return Err(format!("mask of {} changed on round trip", face.id));
        }
    }
    Ok("10 checkpoints, 10 sidecars, 14 masks bit-exact".into())
}

fn report(name: &str, run: impl FnOnce() -> Outcome) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    match outcome {
        Ok(detail) => {
            println!("PASS {name}: {detail}");
            true
        }
        Err(detail) => {
            println!("FAIL {name}: {detail}");
            false
        }
    }
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut passed = vec![
        report("gradient suite", gradient_suite),
        report("layer table conformance", table_conformance),
        report("optimizer conformance", optimizer_conformance),
        report("overfit one batch", overfit),
    ];
    let e2e = run_end_to_end();
    passed.push(report("end-to-end synthetic run", || end_to_end(&e2e)));
    passed.push(report("importance ordering", || importance_ordering(&e2e)));
    passed.push(report("PM invariants", || pm_invariants(&e2e)));
    passed.push(report("determinism", determinism));
    passed.push(report("format round trips", round_trips));
    let failed = passed.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", passed.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
