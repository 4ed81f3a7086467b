use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, SeededRng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Candidate features per split; `None` means `ceil(sqrt(d))`.
    #[serde(default)]
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            trees: 100,
            max_depth: 12,
            min_samples_leaf: 1,
            max_features: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trees == 0 {
            return Err(Error::Config("forest needs at least one tree".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::Config("tree depth must be at least 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::Config("min_samples_leaf must be at least 1".into()));
        }
        if self.max_features == Some(0) {
            return Err(Error::Config("max_features must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Leaf {
        counts: Vec<usize>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Weighted Gini decrease: `n_node * gini_node - n_left * gini_left - n_right * gini_right`.
        decrease: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
    /// Samples (with multiplicity) the tree was grown on.
    pub samples: usize,
    /// Multiplicity of each training row in the tree's sample.
    pub in_bag: Vec<usize>,
}

impl Tree {
    fn leaf(&self, x: &[f64]) -> &[usize] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn is_single_leaf(&self) -> bool {
        self.nodes.len() == 1
    }

    /// Impurity decrease per feature, normalized to sum to one (all zeros
    /// when the tree never splits).
    pub fn importances(&self, features: usize) -> Vec<f64> {
        let mut imp = vec![0.0; features];
        for node in &self.nodes {
            if let Node::Split { feature, decrease, .. } = node {
                imp[*feature] += decrease;
            }
        }
        let total: f64 = imp.iter().sum();
        if total > 0.0 {
            for v in &mut imp {
                *v /= total;
            }
        }
        imp
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub features: usize,
    pub classes: usize,
    pub config: ForestConfig,
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    classes: usize,
    config: &'a ForestConfig,
    max_features: usize,
    rng: SeededRng,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    decrease: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

impl Grower<'_> {
    fn counts(&self, rows: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &r in rows {
            counts[self.y[r]] += 1;
        }
        counts
    }

    fn best_split(&mut self, rows: &[usize], parent: &[usize]) -> Option<BestSplit> {
        let n = rows.len();
        let d = self.x[0].len();
        let parent_impurity = n as f64 * gini(parent, n);
        let mut best: Option<(usize, f64, f64)> = None;
        for feature in self.rng.sample_indices(d, self.max_features) {
            let mut sorted = rows.to_vec();
            sorted.sort_by(|&a, &b| self.x[a][feature].total_cmp(&self.x[b][feature]).then(a.cmp(&b)));
            let mut left = vec![0; self.classes];
            let mut right = parent.to_vec();
            for i in 0..n - 1 {
                let class = self.y[sorted[i]];
                left[class] += 1;
                right[class] -= 1;
                let (lo, hi) = (self.x[sorted[i]][feature], self.x[sorted[i + 1]][feature]);
                let nl = i + 1;
                if lo == hi || nl < self.config.min_samples_leaf || n - nl < self.config.min_samples_leaf {
                    continue;
                }
                let decrease =
                    parent_impurity - nl as f64 * gini(&left, nl) - (n - nl) as f64 * gini(&right, n - nl);
                if decrease > 1e-12 && best.map_or(true, |(_, _, b)| decrease > b) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some((feature, threshold, decrease));
                }
            }
        }
        let (feature, threshold, decrease) = best?;
        let (left, right) = rows.iter().partition(|&&r| self.x[r][feature] <= threshold);
        Some(BestSplit {
            feature,
            threshold,
            decrease,
            left,
            right,
        })
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let counts = self.counts(&rows);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { counts: counts.clone() });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.config.max_depth || rows.len() < 2 * self.config.min_samples_leaf {
            return id;
        }
        let Some(split) = self.best_split(&rows, &counts) else {
            return id;
        };
        let left = self.grow(split.left, depth + 1);
        let right = self.grow(split.right, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            decrease: split.decrease,
        };
        id
    }
}

/// Bagged CART trees with Gini splits over a random feature subset per
/// node. Tree `t` draws from its own stream keyed by `(seed, t)`, so the
/// forest does not depend on how trees are scheduled across threads.
pub fn train_forest(x: &[Vec<f64>], y: &[usize], config: &ForestConfig) -> Result<Forest> {
    config.validate()?;
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::InvalidArgument(format!("{} rows but {} labels", x.len(), y.len())));
    }
    let d = x[0].len();
    if d == 0 || x.iter().any(|r| r.len() != d) {
        return Err(Error::Shape("feature rows must share a non-zero length".into()));
    }
    if let Some(bad) = x.iter().flatten().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("feature value {bad} is not finite")));
    }
    let classes = y.iter().max().map_or(0, |m| m + 1);
    let max_features = config
        .max_features
        .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
        .min(d);
    let n = x.len();
    let trees = (0..config.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = SeededRng::new(derive_seed(config.seed, t as u64));
            let mut in_bag = vec![0; n];
            let rows: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.below(n)).collect()
            } else {
                (0..n).collect()
            };
            for &r in &rows {
                in_bag[r] += 1;
            }
            let mut grower = Grower {
                x,
                y,
                classes,
                config,
                max_features,
                rng,
                nodes: Vec::new(),
            };
            grower.grow(rows, 0);
            Tree {
                nodes: grower.nodes,
                samples: n,
                in_bag,
            }
        })
        .collect();
    Ok(Forest {
        trees,
        features: d,
        classes,
        config: config.clone(),
    })
}

fn vote(counts: &[usize], acc: &mut [f64]) {
    let n: usize = counts.iter().sum();
    if n > 0 {
        for (a, &c) in acc.iter_mut().zip(counts) {
            *a += c as f64 / n as f64;
        }
    }
}

fn top(acc: &[f64]) -> usize {
    crate::netkit::argmax(acc)
}

impl Forest {
    /// Averaged leaf class distributions.
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.classes];
        for t in &self.trees {
            vote(t.leaf(x), &mut acc);
        }
        let k = self.trees.len() as f64;
        acc.iter().map(|v| v / k).collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        top(&self.predict_proba(x))
    }

    /// Accuracy over rows that are out of bag for at least one tree.
    pub fn oob_accuracy(&self, x: &[Vec<f64>], y: &[usize]) -> Option<f64> {
        let (mut hit, mut seen) = (0, 0);
        for (i, row) in x.iter().enumerate() {
            let mut acc = vec![0.0; self.classes];
            let mut votes = 0;
            for t in self.trees.iter().filter(|t| t.in_bag.get(i) == Some(&0)) {
                vote(t.leaf(row), &mut acc);
                votes += 1;
            }
            if votes > 0 {
                seen += 1;
                if top(&acc) == y[i] {
                    hit += 1;
                }
            }
        }
        (seen > 0).then(|| hit as f64 / seen as f64)
    }

    pub fn accuracy(&self, x: &[Vec<f64>], y: &[usize]) -> f64 {
        let hit = x.iter().zip(y).filter(|(r, &l)| self.predict(r) == l).count();
        hit as f64 / x.len() as f64
    }

    /// Mean of the per-tree normalized impurity decreases, renormalized.
    pub fn importances(&self) -> Vec<f64> {
        let mut imp = vec![0.0; self.features];
        for t in &self.trees {
            for (a, v) in imp.iter_mut().zip(t.importances(self.features)) {
                *a += v;
            }
        }
        let total: f64 = imp.iter().sum();
        if total > 0.0 {
            for v in &mut imp {
                *v /= total;
            }
        }
        imp
    }
}

/// Drop in accuracy when one feature column is shuffled, averaged over
/// `repeats` seeded shuffles.
pub fn permutation_importance(forest: &Forest, x: &[Vec<f64>], y: &[usize], repeats: usize, seed: u64) -> Vec<f64> {
    let base = forest.accuracy(x, y);
    let mut rng = SeededRng::new(seed);
    (0..forest.features)
        .map(|f| {
            let mut drop = 0.0;
            for _ in 0..repeats.max(1) {
                let mut column: Vec<f64> = x.iter().map(|r| r[f]).collect();
                rng.shuffle(&mut column);
                let shuffled: Vec<Vec<f64>> = x
                    .iter()
                    .zip(&column)
                    .map(|(r, &v)| {
                        let mut r = r.clone();
                        r[f] = v;
                        r
                    })
                    .collect();
                drop += base - forest.accuracy(&shuffled, y);
            }
            drop / repeats.max(1) as f64
        })
        .collect()
}
