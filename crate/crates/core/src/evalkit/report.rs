//! Report directory layout:
//!
//! ```text
//! metrics.json     versioned metrics (classification, segmentation, importance)
//! confusion.png    attribute confusion matrix, rows = truth in scheme order
//! importance.png   per-class importance bars in palette order (omitted when
//!                  there is no importance section)
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use serde::Serialize;

use super::kfold::{FoldLog, KfoldOutcome};
use super::metrics::{ClsMetrics, Confusion, SegMetrics};
use crate::dataio::encode_rgb_png;
use crate::error::{Error, Result};
use crate::faceseg::PALETTE;
use crate::importance::ImportanceReport;
use crate::netkit::write_atomic;

pub const REPORT_VERSION: u32 = 1;
pub const METRICS_FILE: &str = "metrics.json";
pub const CONFUSION_FILE: &str = "confusion.png";
pub const IMPORTANCE_FILE: &str = "importance.png";

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub format_version: u32,
    pub classification: ClsMetrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segmentation: Option<SegMetrics>,
    pub importance: Option<ImportanceReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub permutation_control: Option<ClsMetrics>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub fold_logs: Vec<FoldLog>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(classification: ClsMetrics, segmentation: Option<SegMetrics>, importance: Option<ImportanceReport>) -> Self {
        Self {
            format_version: REPORT_VERSION,
            classification,
            segmentation,
            importance,
            permutation_control: None,
            fold_logs: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn from_outcome(outcome: &KfoldOutcome) -> Self {
        let mut r = Self::new(
            outcome.classification.clone(),
            outcome.segmentation.clone(),
            outcome.importance.clone(),
        );
        r.fold_logs = outcome.logs.clone();
        r
    }
}

const CELL: u32 = 32;

/// Row-normalized confusion rendered as gray cells (white = all of the row).
pub fn render_confusion(confusion: &Confusion) -> RgbImage {
    let k = confusion.k() as u32;
    let mut img = RgbImage::new(k * CELL, k * CELL);
    for (t, row) in confusion.counts.iter().enumerate() {
        let total: u64 = row.iter().sum();
        for (p, &n) in row.iter().enumerate() {
            let level = if total == 0 {
                0
            } else {
                (255.0 * n as f64 / total as f64).round() as u8
            };
            for y in 0..CELL {
                for x in 0..CELL {
                    let border = x == 0 || y == 0;
                    let v = if border { 96 } else { level };
                    img.put_pixel(p as u32 * CELL + x, t as u32 * CELL + y, Rgb([v, v, v]));
                }
            }
        }
    }
    img
}

const BAR_W: u32 = 40;
const BAR_GAP: u32 = 8;
const CHART_H: u32 = 200;

/// One bar per face class, palette colors, heights relative to the largest.
pub fn render_importance(report: &ImportanceReport) -> RgbImage {
    let n = report.classes.len() as u32;
    let width = n * (BAR_W + BAR_GAP) + BAR_GAP;
    let mut img = RgbImage::from_pixel(width, CHART_H + 2 * BAR_GAP, Rgb([255, 255, 255]));
    let max = report.classes.iter().map(|c| c.score).fold(0.0, f64::max);
    let base = CHART_H + BAR_GAP;
    for (i, c) in report.classes.iter().enumerate() {
        let h = if max > 0.0 {
            (CHART_H as f64 * c.score / max).round() as u32
        } else {
            0
        };
        let color = PALETTE.get(i).map_or([128, 128, 128], |e| e.color);
        let x0 = BAR_GAP + i as u32 * (BAR_W + BAR_GAP);
        for x in x0..x0 + BAR_W {
            for y in base - h..base {
                img.put_pixel(x, y, Rgb(color));
            }
            img.put_pixel(x, base, Rgb([0, 0, 0]));
        }
    }
    img
}

/// Writes the report files; output bytes depend only on `report`.
pub fn emit_report(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut report = report.clone();
    let chart = dir.join(IMPORTANCE_FILE);
    let mut written = Vec::new();
    match &report.importance {
        Some(imp) => {
            write_atomic(&chart, &encode_rgb_png(&render_importance(imp))?)?;
            written.push(chart);
        }
        None => {
            report.notes.push("importance: not computed; no chart written".into());
            if chart.exists() {
                fs::remove_file(&chart).map_err(|e| Error::io(&chart, e))?;
            }
        }
    }
    let confusion = dir.join(CONFUSION_FILE);
    write_atomic(&confusion, &encode_rgb_png(&render_confusion(&report.classification.confusion))?)?;
    written.push(confusion);
    let metrics = dir.join(METRICS_FILE);
    let mut json = serde_json::to_vec_pretty(&report).map_err(|e| Error::Config(e.to_string()))?;
    json.push(b'\n');
    write_atomic(&metrics, &json)?;
    written.push(metrics);
    written.sort();
    Ok(written)
}
