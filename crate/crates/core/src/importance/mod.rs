//! Which face classes drive the attribute label: per-class summary scalars
//! of the probability maps and random-forest mean decrease in impurity.

mod forest;
mod report;
mod summary;

pub use forest::{permutation_importance, train_forest, Forest, ForestConfig, Node, Tree};
pub use report::{importance_report, ImportanceReport, ScoredFeature};
pub use summary::{extract_summary, summary_class, summary_feature_names, SummaryFeatures, SUMMARY_LEN};
