//! Second stage: five-plane feature vectors built from probability maps and
//! the attribute classifier trained on them.

mod feature;
mod model;
mod scheme;

pub use feature::{build_feature_vector, FeatureVector, FEATURE_PLANES};
pub use model::{
    classify, fit_attribute_model, train_attribute_model, AttributeModel, Classification, MIN_EXAMPLES_PER_LABEL,
};
pub use scheme::AttributeScheme;
