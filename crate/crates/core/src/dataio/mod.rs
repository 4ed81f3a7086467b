//! Image and mask files, resampling, illumination normalization, dataset
//! manifests, fold plans and the synthetic face generator.

mod folds;
mod illumination;
mod image_io;
mod manifest;
mod resize;
mod synth;

pub use folds::{make_folds, make_manifest_folds, FoldPlan};
pub use illumination::{luminance, normalize_illumination, LUMA};
pub use image_io::{
    decode_image, decode_mask, encode_gray_png, encode_image_png, encode_mask_png, encode_rgb_png, load_image,
    load_mask, load_pair, rgb_to_tensor, save_image, save_mask, tensor_to_rgb,
};
pub use manifest::{load_dataset, load_manifest, Dataset, DatasetManifest, ManifestEntry, MANIFEST_FILE, MANIFEST_VERSION};
pub use resize::{resize_bilinear, resize_mask};
pub use synth::{generate_face, generate_synthetic, write_synthetic, Range, StyleFamily, SynthConfig, SynthFace};
