use serde::{Deserialize, Serialize};

use crate::error::{DataError, Result};
use crate::faceseg::{LabelMask, CLASS_COUNT, PALETTE};

/// `counts[truth][predicted]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub counts: Vec<Vec<u64>>,
}

impl Confusion {
    pub fn new(k: usize) -> Self {
        Self {
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn merge(&mut self, other: &Confusion) {
        for (row, o) in self.counts.iter_mut().zip(&other.counts) {
            for (a, b) in row.iter_mut().zip(o) {
                *a += b;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.k()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| self.correct() as f64 / total as f64)
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn predicted(&self, class: usize) -> u64 {
        self.counts.iter().map(|r| r[class]).sum()
    }

    /// Per-class scores; a ratio with a zero denominator is `None`.
    pub fn class_stats(&self, class: usize, name: &str) -> ClassStats {
        let tp = self.counts[class][class];
        let support = self.support(class);
        let predicted = self.predicted(class);
        let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            (Some(_), Some(_)) => Some(0.0),
            _ => None,
        };
        ClassStats {
            name: name.to_string(),
            support,
            predicted,
            precision,
            recall,
            f1,
            iou: ratio(tp, support + predicted - tp),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub name: String,
    pub support: u64,
    pub predicted: u64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub iou: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegMetrics {
    pub accuracy: f64,
    pub pixels: u64,
    pub classes: Vec<ClassStats>,
    pub confusion: Confusion,
}

impl SegMetrics {
    pub fn from_confusion(confusion: Confusion) -> Self {
        let classes = PALETTE
            .iter()
            .enumerate()
            .map(|(c, e)| confusion.class_stats(c, e.name))
            .collect();
        Self {
            accuracy: confusion.accuracy().unwrap_or(0.0),
            pixels: confusion.total(),
            classes,
            confusion,
        }
    }
}

pub fn seg_confusion(predicted: &LabelMask, truth: &LabelMask) -> Result<Confusion> {
    if (predicted.width(), predicted.height()) != (truth.width(), truth.height()) {
        return Err(DataError::DimensionMismatch(format!(
            "predicted mask is {}x{}, truth is {}x{}",
            predicted.width(),
            predicted.height(),
            truth.width(),
            truth.height()
        ))
        .into());
    }
    let mut confusion = Confusion::new(CLASS_COUNT);
    for (&p, &t) in predicted.data().iter().zip(truth.data()) {
        confusion.add(t as usize, p as usize);
    }
    Ok(confusion)
}

pub fn seg_metrics(predicted: &LabelMask, truth: &LabelMask) -> Result<SegMetrics> {
    Ok(SegMetrics::from_confusion(seg_confusion(predicted, truth)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub fold: usize,
    pub test_count: usize,
    pub accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seg_accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClsMetrics {
    /// Pooled over every held-out item.
    pub accuracy: f64,
    pub labels: Vec<ClassStats>,
    pub confusion: Confusion,
    pub folds: Vec<FoldScore>,
    pub mean_accuracy: f64,
    /// Sample standard deviation of the per-fold accuracies.
    pub std_accuracy: f64,
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl ClsMetrics {
    pub fn new(confusion: Confusion, label_names: &[String], mut folds: Vec<FoldScore>) -> Self {
        folds.sort_by_key(|f| f.fold);
        let accs: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
        let (mean_accuracy, std_accuracy) = mean_std(&accs);
        Self {
            accuracy: confusion.accuracy().unwrap_or(0.0),
            labels: label_names
                .iter()
                .enumerate()
                .map(|(i, n)| confusion.class_stats(i, n))
                .collect(),
            confusion,
            folds,
            mean_accuracy,
            std_accuracy,
        }
    }
}
