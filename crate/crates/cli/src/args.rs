use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "faceparse", version, about = "Face parsing and attribute classification")]
pub struct Cli {
    /// Base seed for every random stream of the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Built-in profile name (`toy`, `paper`) or path to a profile TOML file.
    #[arg(long, global = true, default_value = "toy")]
    pub profile: String,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "command")]
pub enum Command {
    /// Generate a labeled synthetic dataset with a manifest.
    Synth(SynthArgs),
    /// Train the segmentation network on every masked image of a dataset.
    TrainSeg(TrainSegArgs),
    /// Write probability maps for one image or a whole dataset.
    Segment(SegmentArgs),
    /// Train the attribute classifier on probability-map features.
    TrainAttr(TrainAttrArgs),
    /// Classify one image, or one set of saved probability maps.
    Classify(ClassifyArgs),
    /// Rank classes by random-forest importance.
    Importance(ImportanceArgs),
    /// Run the k-fold protocol and write a report directory.
    Kfold(KfoldArgs),
    /// Serve the annotation API for a dataset.
    Serve(ServeArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Number of faces.
    #[arg(long)]
    pub n: usize,
    /// Image side in pixels (defaults to the profile's).
    #[arg(long)]
    pub size: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainSegArgs {
    /// Dataset directory or manifest file.
    #[arg(long)]
    pub data: PathBuf,
    /// Override the profile's epoch count.
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct SegmentArgs {
    /// Segmentation checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    /// Single image; maps go straight into `--out`.
    #[arg(long, conflicts_with = "data", required_unless_present = "data")]
    pub image: Option<PathBuf>,
    /// Dataset; maps for entry `id` go into `--out/id`.
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainAttrArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Segmentation checkpoint used to compute the features.
    #[arg(long)]
    pub seg_model: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct ClassifyArgs {
    /// Attribute checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    /// Saved maps: a `segment` output directory or its sidecar file.
    #[arg(long, conflicts_with_all = ["image", "seg_model"], required_unless_present = "image")]
    pub pms: Option<PathBuf>,
    #[arg(long, requires = "seg_model")]
    pub image: Option<PathBuf>,
    #[arg(long)]
    pub seg_model: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ImportanceArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub seg_model: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct KfoldArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Train one segmentation model on all masked images instead of one per fold.
    #[arg(long)]
    pub shared_seg_model: bool,
    /// Also evaluate the attribute stage on shuffled labels.
    #[arg(long)]
    pub permutation_control: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct ServeArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8750")]
    pub bind: String,
    /// Directory of a built annotation UI, served at `/`.
    #[arg(long)]
    pub ui: Option<PathBuf>,
}
