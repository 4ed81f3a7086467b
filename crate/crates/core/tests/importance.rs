use faceparse::faceseg::{LabelMask, ProbabilityMaps, CLASS_COUNT};
use faceparse::importance::{
    extract_summary, importance_report, permutation_importance, summary_feature_names, train_forest, ForestConfig,
    SUMMARY_LEN,
};
use faceparse::rng::SeededRng;

fn random_pms(w: usize, h: usize, seed: u64) -> ProbabilityMaps {
    let mut rng = SeededRng::new(seed);
    let area = w * h;
    let mut planes = vec![0.0; CLASS_COUNT * area];
    for p in 0..area {
        let raw: Vec<f64> = (0..CLASS_COUNT).map(|_| rng.next_f64().powi(3)).collect();
        let total: f64 = raw.iter().sum();
        for (c, v) in raw.iter().enumerate() {
            planes[c * area + p] = v / total;
        }
    }
    ProbabilityMaps::new(w, h, planes).unwrap()
}

#[test]
fn uniform_maps_summary() {
    let s = extract_summary(&ProbabilityMaps::uniform(6, 5), 1);
    assert_eq!(s.label, 1);
    for c in 0..CLASS_COUNT {
        assert!((s.values[3 * c] - 1.0 / 7.0).abs() < 1e-15);
        assert!(s.values[3 * c + 1].abs() < 1e-15);
        assert_eq!(s.values[3 * c + 2], if c == 0 { 1.0 } else { 0.0 });
    }
}

#[test]
fn half_and_half_mask_areas() {
    let data: Vec<u8> = (0..40).map(|i| if i % 8 < 4 { 2 } else { 1 }).collect();
    let mask = LabelMask::new(8, 5, data).unwrap();
    let s = extract_summary(&ProbabilityMaps::one_hot(&mask), 0);
    assert_eq!(s.values[3 + 2], 0.5);
    assert_eq!(s.values[6 + 2], 0.5);
    assert_eq!(s.values[3], 0.5);
    assert_eq!(s.values[4], 0.5);
    let areas: f64 = (0..CLASS_COUNT).map(|c| s.values[3 * c + 2]).sum();
    assert_eq!(areas, 1.0);
}

#[test]
fn summary_matches_straight_loop_statistics() {
    let (w, h) = (11, 9);
    let pms = random_pms(w, h, 3);
    let s = extract_summary(&pms, 0);
    let n = (w * h) as f64;
    let mut wins = [0usize; CLASS_COUNT];
    for y in 0..h {
        for x in 0..w {
            let px = pms.pixel(x, y);
            let mut best = 0;
            for c in 0..CLASS_COUNT {
                if px[c] > px[best] {
                    best = c;
                }
            }
            wins[best] += 1;
        }
    }
    for c in 0..CLASS_COUNT {
        // Welford's update, a different summation path from the two-pass code.
        let (mut mean, mut m2) = (0.0, 0.0);
        for (k, v) in pms.plane(c).iter().enumerate() {
            let d = v - mean;
            mean += d / (k + 1) as f64;
            m2 += d * (v - mean);
        }
        assert!((s.values[3 * c] - mean).abs() < 1e-12);
        assert!((s.values[3 * c + 1] - (m2 / n).sqrt()).abs() < 1e-12);
        assert!((s.values[3 * c + 2] - wins[c] as f64 / n).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&s.values[3 * c]));
    }
    assert_eq!(summary_feature_names().len(), SUMMARY_LEN);
    assert_eq!(summary_feature_names()[4], "skin.std");
}

fn noise(rows: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = SeededRng::new(seed);
    (0..rows).map(|_| (0..SUMMARY_LEN).map(|_| rng.next_f64()).collect()).collect()
}

#[test]
fn single_label_forest_is_uninformative() {
    let x = noise(30, 1);
    let y = vec![1; 30];
    let forest = train_forest(&x, &y, &ForestConfig::default()).unwrap();
    assert!(forest.trees.iter().all(|t| t.is_single_leaf()));
    assert_eq!(forest.accuracy(&x, &y), 1.0);
    let report = importance_report(&forest);
    assert!(report.uninformative);
    assert!(report.features.iter().all(|f| f.score == 0.0));
}

fn indicator(rows: usize, j: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let x = noise(rows, seed);
    let y = x.iter().map(|r| usize::from(r[j] > 0.5)).collect();
    (x, y)
}

#[test]
fn indicator_feature_found_and_ranked_first() {
    let j = 13;
    let (x, y) = indicator(400, j, 2);
    let config = ForestConfig {
        trees: 50,
        seed: 3,
        ..Default::default()
    };
    let forest = train_forest(&x, &y, &config).unwrap();
    let oob = forest.oob_accuracy(&x, &y).unwrap();
    assert!(oob >= 0.95, "oob {oob}");
    let report = importance_report(&forest);
    let total: f64 = report.features.iter().map(|f| f.score).sum();
    assert!((total - 1.0).abs() < 1e-9);
    assert!(report.features.iter().all(|f| f.score >= 0.0));
    let top = report.features.iter().map(|f| f.score).enumerate().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    assert_eq!(top.0, j);
    assert!(report.features.iter().enumerate().all(|(i, f)| i == j || f.score < top.1));
    assert_eq!(report.ranking[0], "brows");
    let perm = permutation_importance(&forest, &x, &y, 3, 4);
    assert_eq!(perm.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0, j);
}

#[test]
fn forests_are_seed_deterministic() {
    let (x, y) = indicator(120, 2, 5);
    let config = ForestConfig {
        trees: 20,
        seed: 6,
        ..Default::default()
    };
    let a = train_forest(&x, &y, &config).unwrap();
    let b = train_forest(&x, &y, &config).unwrap();
    assert_eq!(a, b);
    let c = train_forest(&x, &y, &ForestConfig { seed: 7, ..config }).unwrap();
    assert_ne!(a, c);
}

#[test]
fn shuffling_an_uninformative_column_barely_moves_its_score() {
    let (x, y) = indicator(300, 0, 8);
    let config = ForestConfig {
        trees: 100,
        seed: 9,
        ..Default::default()
    };
    let base = train_forest(&x, &y, &config).unwrap().importances();
    let u = 7;
    let mut column: Vec<f64> = x.iter().map(|r| r[u]).collect();
    SeededRng::new(10).shuffle(&mut column);
    let shuffled: Vec<Vec<f64>> = x
        .iter()
        .zip(&column)
        .map(|(r, &v)| {
            let mut r = r.clone();
            r[u] = v;
            r
        })
        .collect();
    let after = train_forest(&shuffled, &y, &config).unwrap().importances();
    assert!((base[u] - after[u]).abs() < 0.05, "{} vs {}", base[u], after[u]);
}

#[test]
fn unbagged_unlimited_trees_memorize() {
    let x = noise(60, 11);
    let y: Vec<usize> = (0..60).map(|i| i % 3).collect();
    let config = ForestConfig {
        trees: 5,
        max_depth: usize::MAX,
        max_features: Some(SUMMARY_LEN),
        bootstrap: false,
        seed: 12,
        ..Default::default()
    };
    let forest = train_forest(&x, &y, &config).unwrap();
    assert_eq!(forest.accuracy(&x, &y), 1.0);
    assert_eq!(forest.oob_accuracy(&x, &y), None);
}
