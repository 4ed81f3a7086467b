//! Segmentation and classification metrics, the k-fold experiment runner
//! and report emission.

mod kfold;
mod metrics;
mod report;

pub use kfold::{
    dataset_labels, held_out_importance, permute_labels, run_attribute_stage, run_kfold, run_segmentation_stage,
    AttributeStage, FoldLog, FoldSegmentation, KfoldOptions, KfoldOutcome, SegStage,
};
pub use metrics::{mean_std, seg_confusion, seg_metrics, ClassStats, ClsMetrics, Confusion, FoldScore, SegMetrics};
pub use report::{
    emit_report, render_confusion, render_importance, Report, CONFUSION_FILE, IMPORTANCE_FILE, METRICS_FILE,
    REPORT_VERSION,
};
