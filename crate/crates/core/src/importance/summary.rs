use crate::faceseg::{argmax_mask, ProbabilityMaps, CLASS_COUNT, PALETTE};

pub const SUMMARY_LEN: usize = 3 * CLASS_COUNT;

/// Mean, population standard deviation and argmax area fraction of every
/// class plane: index `3c` is the mean of class `c`, `3c + 1` its standard
/// deviation, `3c + 2` its area share.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryFeatures {
    pub values: [f64; SUMMARY_LEN],
    pub label: usize,
}

pub fn summary_feature_names() -> Vec<String> {
    PALETTE
        .iter()
        .flat_map(|e| ["mean", "std", "area"].map(|s| format!("{}.{s}", e.name)))
        .collect()
}

/// Face class owning a summary scalar.
pub fn summary_class(feature: usize) -> usize {
    feature / 3
}

pub fn extract_summary(pms: &ProbabilityMaps, label: usize) -> SummaryFeatures {
    let n = (pms.width() * pms.height()) as f64;
    let counts = argmax_mask(pms).class_counts();
    let mut values = [0.0; SUMMARY_LEN];
    for c in 0..CLASS_COUNT {
        let plane = pms.plane(c);
        let mean = plane.iter().sum::<f64>() / n;
        let var = plane.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        values[3 * c] = mean;
        values[3 * c + 1] = var.sqrt();
        values[3 * c + 2] = counts[c] as f64 / n;
    }
    SummaryFeatures { values, label }
}
