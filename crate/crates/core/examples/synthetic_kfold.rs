//! Runs the k-fold protocol on generated faces and prints the summary.
//!
//! `cargo run --release --example synthetic_kfold -- [faces] [folds] [size]`

use std::time::Instant;

use faceparse::dataio::{generate_synthetic, Dataset};
use faceparse::evalkit::{run_kfold, KfoldOptions};
use faceparse::profile::Profile;

fn main() -> faceparse::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let n = args.first().copied().unwrap_or(100);
    let k = args.get(1).copied().unwrap_or(10);
    let mut profile = Profile::toy_defaults();
    if let Some(&size) = args.get(2) {
        profile.synth.size = size;
    }
    let faces = generate_synthetic(&profile.synth, n)?;
    let data = Dataset {
        ids: faces.iter().map(|f| f.id.clone()).collect(),
        images: faces.iter().map(|f| f.image.clone()).collect(),
        masks: faces.iter().map(|f| Some(f.mask.clone())).collect(),
        labels: faces.iter().map(|f| Some(f.family)).collect(),
        scheme: Some(profile.synth.scheme()),
        digests: vec![String::new(); n],
    };
    let start = Instant::now();
    let out = run_kfold(&data, &profile, &KfoldOptions::new(k, 7))?;
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    println!(
        "attribute mean {:.4} (std {:.4}), pooled {:.4}",
        out.classification.mean_accuracy, out.classification.std_accuracy, out.classification.accuracy
    );
    if let Some(seg) = &out.segmentation {
        println!("segmentation pixel accuracy {:.4}", seg.accuracy);
    }
    if let Some(imp) = &out.importance {
        println!("importance ranking {:?}", imp.ranking);
    }
    Ok(())
}
