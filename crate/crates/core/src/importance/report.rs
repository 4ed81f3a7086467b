use serde::Serialize;

use super::forest::Forest;
use super::summary::{summary_class, summary_feature_names};
use crate::faceseg::{CLASS_COUNT, PALETTE};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoredFeature {
    pub name: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImportanceReport {
    /// Normalized mean decrease in impurity per summary scalar.
    pub features: Vec<ScoredFeature>,
    /// Sum of each face class's three scalars, in palette order.
    pub classes: Vec<ScoredFeature>,
    /// Class names by descending score; ties keep palette order.
    pub ranking: Vec<String>,
    /// Set when no tree ever split, in which case all scores are zero.
    pub uninformative: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oob_accuracy: Option<f64>,
}

impl ImportanceReport {
    pub fn class_score(&self, name: &str) -> Option<f64> {
        self.classes.iter().find(|c| c.name == name).map(|c| c.score)
    }
}

/// Builds the report for a forest over the 21 summary scalars.
pub fn importance_report(forest: &Forest) -> ImportanceReport {
    let scores = forest.importances();
    let names = summary_feature_names();
    let mut class_scores = [0.0; CLASS_COUNT];
    for (f, &s) in scores.iter().enumerate() {
        class_scores[summary_class(f)] += s;
    }
    let mut order: Vec<usize> = (0..CLASS_COUNT).collect();
    order.sort_by(|&a, &b| class_scores[b].total_cmp(&class_scores[a]).then(a.cmp(&b)));
    ImportanceReport {
        features: names
            .into_iter()
            .zip(&scores)
            .map(|(name, &score)| ScoredFeature { name, score })
            .collect(),
        classes: PALETTE
            .iter()
            .zip(class_scores)
            .map(|(e, score)| ScoredFeature {
                name: e.name.to_string(),
                score,
            })
            .collect(),
        ranking: order.iter().map(|&c| PALETTE[c].name.to_string()).collect(),
        uninformative: scores.iter().all(|&s| s == 0.0),
        oob_accuracy: None,
    }
}
