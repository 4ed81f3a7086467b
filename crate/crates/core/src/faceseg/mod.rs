//! Face parsing: class palette, label masks, patch sampling, sliding-window
//! segmentation into probability maps, and PM export.

mod mask;
mod palette;
mod patches;
mod pms;
mod segment;
mod sidecar;

pub use mask::LabelMask;
pub use palette::{class_index, class_name, ClassEntry, BACK, BROWS, CLASS_COUNT, EYES, FEATURE_CLASSES, HAIR, MOUTH, NOSE, PALETTE, SKIN};
pub use patches::{
    extract_patch, pad_reflect, reflect_index, sample_training_patches, BorderPolicy, PaddedImage, PatchPlan,
    PatchSample, SamplingReport,
};
pub use pms::{
    argmax_mask, export_pms, load_pms_sidecar, pm_file_name, quantize_plane, ProbabilityMaps, PROVENANCE_FILE,
    SIDECAR_FILE, SUM_TOLERANCE,
};
pub use segment::{segment, segment_naive, train_segmentation, SegExample, SegTraining};
pub use sidecar::{decode_planes, encode_planes, PlaneStack, SIDECAR_MAGIC, SIDECAR_VERSION};
