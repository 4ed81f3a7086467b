use std::ops::ControlFlow;

use faceparse::netkit::{
    decode_checkpoint, encode_checkpoint, paper_network, toy_network, train, CheckpointMeta, LayerSpec, MomentumSgd,
    Network, NetworkSpec, NoObserver, TrainConfig, CHECKPOINT_VERSION,
};
use faceparse::rng::SeededRng;
use faceparse::tensor::{Padding, Tensor};
use faceparse::{CheckpointError, Error};

const TABLE_MAPS: [usize; 8] = [96, 96, 256, 256, 316, 316, 512, 512];
const TABLE_SIZES: [usize; 8] = [124, 62, 30, 15, 12, 6, 4, 2];

/// Spatial layers of a resolved spec: (name, input extent, kernel, stride, padding, output shape).
fn spatial_rows(spec: &NetworkSpec) -> Vec<(String, usize, usize, usize, Padding, Vec<usize>)> {
    let resolved = spec.resolve_padding().unwrap();
    let shapes = resolved.infer_shapes().unwrap();
    let mut extent = spec.input_shape[1];
    let mut rows = Vec::new();
    for ((i, shape), layer) in shapes.iter().zip(&resolved.layers) {
        if let Some(g) = layer.geometry() {
            rows.push((layer.label(*i), extent, g.kernel.0, g.stride.0, g.padding, shape.clone()));
            extent = shape[1];
        }
    }
    rows
}

#[test]
fn paper_profile_reproduces_layer_table() {
    for channels in [3, 5] {
        let rows = spatial_rows(&paper_network(channels, 7, 512));
        assert_eq!(rows.len(), 8);
        for (row, (maps, size)) in rows.iter().zip(TABLE_MAPS.iter().zip(TABLE_SIZES)) {
            assert_eq!(row.5, vec![*maps, size, size], "{}", row.0);
        }
        let names: Vec<&str> = rows.iter().map(|r| r.0.as_str()).collect();
        assert_eq!(names, ["CL-1", "PL-1", "CL-2", "PL-2", "CL-3", "PL-3", "CL-4", "PL-4"]);
    }
}

/// Smallest total padding first, then the smallest leading share, such that
/// every window touches at least one real pixel. Written independently of
/// the resolver.
fn oracle_padding(input: usize, kernel: usize, stride: usize, target: usize) -> Option<(usize, usize)> {
    for total in 0..=2 * kernel {
        let padded = input + total;
        if padded < kernel || (padded - kernel) / stride + 1 != target {
            continue;
        }
        for top in 0..=total {
            let overlaps = (0..target).all(|o| {
                let lo = o * stride;
                let hi = lo + kernel - 1;
                hi >= top && lo < top + input
            });
            if overlaps {
                return Some((top, total - top));
            }
        }
    }
    None
}

#[test]
fn resolved_padding_matches_oracle() {
    for rows in [spatial_rows(&paper_network(3, 7, 512)), spatial_rows(&paper_network(5, 2, 64))] {
        for (name, input, k, s, pad, shape) in rows {
            let want = oracle_padding(input, k, s, shape[1]).unwrap();
            assert_eq!((pad.top, pad.bottom), want, "{name}");
            assert_eq!((pad.left, pad.right), want, "{name}");
        }
    }
}

#[test]
fn first_five_paper_layers_pad_one_trailing_pixel() {
    let rows = spatial_rows(&paper_network(3, 7, 512));
    for row in &rows[..6] {
        assert_eq!(row.4, Padding::new(0, 1, 0, 1), "{}", row.0);
    }
    assert_eq!(rows[1].1, 124);
    assert_eq!(rows[6].4, Padding::new(1, 4, 1, 4), "CL-4 on 6x6 reaching 4x4");
    assert_eq!(rows[7].4, Padding::new(0, 1, 0, 1), "PL-4 on 4x4 reaching 2x2");
}

#[test]
fn resolution_is_idempotent() {
    let once = paper_network(3, 7, 512).resolve_padding().unwrap();
    assert_eq!(once.resolve_padding().unwrap(), once);
}

#[test]
fn toy_extents_strictly_decrease() {
    for side in [9, 10, 11, 12, 24, 32, 33] {
        let spec = toy_network([3, side, side], 7);
        let rows = spatial_rows(&spec);
        let mut prev = side;
        for row in &rows {
            assert!(row.5[1] < prev, "side {side}, {}: {} !< {prev}", row.0, row.5[1]);
            prev = row.5[1];
        }
    }
}

#[test]
fn init_is_seeded_with_zero_biases() {
    let spec = toy_network([3, 11, 11], 7);
    let a = Network::<f64>::init(&spec, 9).unwrap();
    let b = Network::<f64>::init(&spec, 9).unwrap();
    let c = Network::<f64>::init(&spec, 10).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    for (name, block) in a.block_names().iter().zip(a.blocks()) {
        if name.ends_with(".bias") {
            assert!(block.data().iter().all(|&v| v == 0.0), "{name}");
        }
    }
}

#[test]
fn init_weights_follow_fan_in_bound() {
    let net = Network::<f64>::init(&paper_network(3, 7, 512), 1).unwrap();
    let w = net.blocks()[0];
    assert_eq!(w.shape(), [96, 3, 5, 5]);
    let bound = (6.0f64 / 75.0).sqrt();
    assert!(w.data().iter().all(|v| v.abs() <= bound));
    let n = w.len() as f64;
    let mean = w.sum() / n;
    let se = bound / 3f64.sqrt() / n.sqrt();
    assert!(mean.abs() < 3.0 * se, "mean {mean} vs 3 SE {}", 3.0 * se);
    let var = w.data().iter().map(|v| v * v).sum::<f64>() / n;
    let expected = bound * bound / 3.0;
    assert!((var - expected).abs() < 0.1 * expected);
}

/// Two roots of the characteristic polynomial of the (velocity, weight)
/// recurrence on `f(w) = a w^2 / 2`.
fn quadratic_trace(w0: f64, a: f64, lr: f64, mu: f64, steps: usize) -> Vec<f64> {
    let tr = mu + 1.0 - lr * a;
    let disc = (tr * tr - 4.0 * mu).sqrt();
    let (l1, l2) = ((tr + disc) / 2.0, (tr - disc) / 2.0);
    let w1 = (1.0 - lr * a) * w0;
    let c2 = (w1 - l1 * w0) / (l2 - l1);
    let c1 = w0 - c2;
    (1..=steps).map(|t| c1 * l1.powi(t as i32) + c2 * l2.powi(t as i32)).collect()
}

#[test]
fn momentum_matches_closed_forms() {
    let (lr, mu) = (1e-5, 0.8);
    let g = 3.0;
    let mut opt = MomentumSgd::new(lr, mu);
    let mut w = [1.5f64];
    for t in 1..=10 {
        opt.step(&mut [&mut w], &[&[g]]);
        let tf = t as f64;
        let v = -lr * g * (1.0 - mu.powi(t)) / (1.0 - mu);
        let expected = 1.5 - lr * g / (1.0 - mu) * (tf - mu * (1.0 - mu.powi(t)) / (1.0 - mu));
        assert!((opt.velocity()[0][0] - v).abs() <= 1e-12);
        assert!((w[0] - expected).abs() <= 1e-12, "step {t}");
    }

    let a = 500.0;
    let mut opt = MomentumSgd::new(lr, mu);
    let mut w = [0.7f64];
    for (t, expected) in quadratic_trace(0.7, a, lr, mu, 10).into_iter().enumerate() {
        let grad = a * w[0];
        opt.step(&mut [&mut w], &[&[grad]]);
        assert!((w[0] - expected).abs() <= 1e-12, "step {}: {} vs {expected}", t + 1, w[0]);
    }
}

fn patches(n: usize, seed: u64) -> Vec<(Tensor<f64>, usize)> {
    let mut rng = SeededRng::new(seed);
    (0..n)
        .map(|i| (Tensor::from_fn(&[3, 11, 11], |_| rng.uniform(0.0, 1.0)).unwrap(), i % 7))
        .collect()
}

#[test]
fn overfits_eight_patches() {
    let spec = toy_network([3, 11, 11], 7);
    let mut net = Network::init(&spec, 3).unwrap();
    let data = patches(8, 4);
    let config = TrainConfig {
        epochs: 500,
        learning_rate: 0.05,
        momentum: 0.8,
        batch_size: 8,
        seed: 5,
    };
    let start = std::time::Instant::now();
    let mut reached = None;
    let mut stop = |step: usize, loss: f64| {
        if loss < 0.01 {
            reached = Some(step);
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    };
    train(&mut net, &data, &config, &mut stop).unwrap();
    let step = reached.expect("loss stayed above 0.01 for 500 steps");
    assert!(step <= 500);
    assert!(start.elapsed().as_secs() < 60);
}

#[test]
fn zero_learning_rate_is_a_fixed_point() {
    let spec = toy_network([3, 11, 11], 7);
    let mut net = Network::init(&spec, 3).unwrap();
    let before = net.clone();
    let config = TrainConfig {
        epochs: 3,
        learning_rate: 0.0,
        momentum: 0.8,
        batch_size: 4,
        seed: 1,
    };
    let history = train(&mut net, &patches(10, 2), &config, &mut NoObserver).unwrap();
    assert_eq!(net, before);
    assert_eq!(history.steps, 9);
}

fn trained_bytes(seed: u64) -> (Vec<u8>, faceparse::netkit::History) {
    let spec = toy_network([3, 11, 11], 7);
    let mut net = Network::init(&spec, seed).unwrap();
    let config = TrainConfig {
        epochs: 3,
        learning_rate: 0.02,
        momentum: 0.8,
        batch_size: 5,
        seed,
    };
    let history = train(&mut net, &patches(20, 8), &config, &mut NoObserver).unwrap();
    (encode_checkpoint(&net, &CheckpointMeta::default()).unwrap(), history)
}

#[test]
fn training_is_deterministic_per_seed() {
    let (a, ha) = trained_bytes(11);
    let (b, hb) = trained_bytes(11);
    let (c, _) = trained_bytes(12);
    assert_eq!(ha, hb);
    assert_eq!(a, b);
    assert_ne!(a, c);
}

fn sample_checkpoint() -> (Network<f32>, CheckpointMeta, Vec<u8>) {
    let net = Network::<f32>::init(&toy_network([5, 12, 12], 3), 21).unwrap();
    let meta = CheckpointMeta {
        model_id: "m".into(),
        config: Some(TrainConfig::paper()),
        epoch: 4,
        seed: 21,
        labels: None,
    };
    let bytes = encode_checkpoint(&net, &meta).unwrap();
    (net, meta, bytes)
}

#[test]
fn checkpoint_round_trips_bit_exactly() {
    let (net, meta, bytes) = sample_checkpoint();
    let (decoded, decoded_meta) = decode_checkpoint(&bytes, Some(net.spec())).unwrap();
    assert_eq!(decoded_meta, meta);
    assert_eq!(decoded.cast::<f32>(), net);
    assert_eq!(encode_checkpoint(&decoded, &meta).unwrap(), bytes);
}

#[test]
fn corrupted_parameter_byte_fails_checksum() {
    let (_, _, mut bytes) = sample_checkpoint();
    let n = bytes.len();
    bytes[n - 20] ^= 0x01;
    match decode_checkpoint(&bytes, None) {
        Err(Error::Checkpoint(CheckpointError::ChecksumMismatch(block))) => assert!(block.contains("bias")),
        other => panic!("expected checksum mismatch, got {other:?}"),
    }
}

#[test]
fn class_count_mismatch_is_incompatible() {
    let (net, _, bytes) = sample_checkpoint();
    let other = net.spec().with_class_count(4);
    assert!(matches!(
        decode_checkpoint(&bytes, Some(&other)),
        Err(Error::Checkpoint(CheckpointError::Incompatible(_)))
    ));
}

#[test]
fn truncated_and_foreign_files_rejected() {
    let (_, _, bytes) = sample_checkpoint();
    for cut in [2, 10, 40, bytes.len() - 9] {
        let err = decode_checkpoint(&bytes[..cut], None).unwrap_err();
        assert!(matches!(err, Error::Checkpoint(CheckpointError::Truncated(_))), "cut {cut}: {err:?}");
    }
    let mut future = bytes.clone();
    future[4..8].copy_from_slice(&(CHECKPOINT_VERSION + 1).to_le_bytes());
    assert!(matches!(
        decode_checkpoint(&future, None),
        Err(Error::Checkpoint(CheckpointError::UnsupportedVersion { .. }))
    ));
    let mut foreign = bytes;
    foreign[0] = b'X';
    assert!(matches!(decode_checkpoint(&foreign, None), Err(Error::Checkpoint(CheckpointError::BadMagic(_)))));
}

#[test]
fn dense_only_network_is_a_linear_classifier() {
    let spec = NetworkSpec {
        input_shape: [1, 1, 4],
        class_count: 3,
        layers: vec![LayerSpec::Dense { outputs: 3 }, LayerSpec::SoftmaxHead],
    };
    let net = Network::<f64>::zeros(&spec).unwrap();
    let p = net.predict(&Tensor::filled(&[1, 1, 4], 1.0)).unwrap();
    assert!(p.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
}
