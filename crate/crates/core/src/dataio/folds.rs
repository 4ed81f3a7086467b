use serde::{Deserialize, Serialize};

use super::manifest::DatasetManifest;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// Fold index of every entry, in entry order.
    pub assignment: Vec<usize>,
    pub stratified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] != fold).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Seeded k-way partition.
///
/// When every entry has a label and each label has at least `k` members the
/// plan is stratified: members of each label (in label order) are shuffled
/// and dealt round-robin, continuing the deal across labels so fold sizes
/// differ by at most one. Otherwise all entries are shuffled and dealt the
/// same way, and the plan carries a warning.
pub fn make_folds(labels: &[Option<usize>], k: usize, seed: u64) -> Result<FoldPlan> {
    let n = labels.len();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("cannot split {n} entries into {k} folds")));
    }
    let mut rng = SeededRng::new(seed);
    let mut assignment = vec![0; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut warning = None;
    if labels.iter().all(Option::is_some) {
        let classes = labels.iter().flatten().max().map_or(0, |m| m + 1);
        groups = vec![Vec::new(); classes];
        for (i, l) in labels.iter().enumerate() {
            groups[l.unwrap()].push(i);
        }
        groups.retain(|g| !g.is_empty());
        if let Some(rare) = groups.iter().find(|g| g.len() < k) {
            warning = Some(format!(
                "label {} has {} entries, fewer than {k} folds; using an unstratified split",
                labels[rare[0]].unwrap(),
                rare.len()
            ));
            groups.clear();
        }
    } else {
        warning = Some("some entries are unlabeled; using an unstratified split".into());
    }
    let stratified = !groups.is_empty();
    if !stratified {
        groups = vec![(0..n).collect()];
    }
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    let mut dealt = 0;
    for group in &mut groups {
        rng.shuffle(group);
        for &i in group.iter() {
            assignment[i] = dealt % k;
            dealt += 1;
        }
    }
    Ok(FoldPlan {
        k,
        seed,
        assignment,
        stratified,
        warning,
    })
}

pub fn make_manifest_folds(manifest: &DatasetManifest, k: usize, seed: u64) -> Result<FoldPlan> {
    let labels: Vec<Option<usize>> = manifest.entries.iter().map(|e| manifest.label_index(e)).collect();
    make_folds(&labels, k, seed)
}
