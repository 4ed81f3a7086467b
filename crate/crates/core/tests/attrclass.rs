use faceparse::attrclass::{
    build_feature_vector, classify, train_attribute_model, AttributeModel, AttributeScheme, FeatureVector,
};
use faceparse::faceseg::{ProbabilityMaps, CLASS_COUNT, FEATURE_CLASSES};
use faceparse::netkit::{toy_network, CheckpointMeta, Network, NoObserver, TrainConfig};
use faceparse::rng::SeededRng;
use faceparse::tensor::Tensor;
use faceparse::Error;

fn random_pms(w: usize, h: usize, seed: u64) -> ProbabilityMaps {
    let mut rng = SeededRng::new(seed);
    let area = w * h;
    let mut planes = vec![0.0; CLASS_COUNT * area];
    for p in 0..area {
        let raw: Vec<f64> = (0..CLASS_COUNT).map(|_| rng.next_f64()).collect();
        let total: f64 = raw.iter().sum();
        for (c, v) in raw.iter().enumerate() {
            planes[c * area + p] = v / total;
        }
    }
    ProbabilityMaps::new(w, h, planes).unwrap()
}

fn scheme() -> AttributeScheme {
    AttributeScheme::new("gender", ["female", "male"]).unwrap()
}

#[test]
fn uniform_maps_give_constant_features() {
    let f = build_feature_vector(&ProbabilityMaps::uniform(13, 9), 6, 4).unwrap();
    assert_eq!(f.planes.shape(), [5, 6, 4]);
    assert!(f.planes.data().iter().all(|&v| (v - 1.0 / 7.0).abs() < 1e-15));
}

#[test]
fn same_size_selection_is_bitwise() {
    let pms = random_pms(8, 5, 1);
    let f = build_feature_vector(&pms, 5, 8).unwrap();
    for (i, &class) in FEATURE_CLASSES.iter().enumerate() {
        let plane = &f.planes.data()[i * 40..(i + 1) * 40];
        for (a, b) in plane.iter().zip(pms.plane(class as usize)) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn back_and_skin_planes_never_matter() {
    let pms = random_pms(7, 7, 2);
    let mut planes = pms.planes().to_vec();
    let area = 49;
    for p in 0..area {
        let moved = planes[p] * 0.5;
        planes[p] -= moved;
        planes[area + p] += moved;
    }
    let shifted = ProbabilityMaps::new(7, 7, planes).unwrap();
    assert_eq!(
        build_feature_vector(&pms, 4, 4).unwrap().planes,
        build_feature_vector(&shifted, 4, 4).unwrap().planes
    );
}

#[test]
fn degenerate_size_rejected() {
    assert!(build_feature_vector(&ProbabilityMaps::uniform(4, 4), 0, 4).is_err());
}

#[test]
fn feature_sidecar_round_trips() {
    let f = build_feature_vector(&random_pms(6, 6, 3), 6, 6).unwrap();
    let back = FeatureVector::from_sidecar(&f.to_sidecar().unwrap(), "").unwrap();
    assert_eq!(back.planes, f.planes);
}

fn feature(mouth: f64, seed: u64) -> FeatureVector {
    let mut rng = SeededRng::new(seed);
    let planes = Tensor::from_fn(&[5, 8, 8], |i| {
        let noise = 0.05 * rng.next_f64();
        if i / 64 == 4 && (i % 64) / 8 >= 5 {
            mouth + noise
        } else {
            noise
        }
    })
    .unwrap();
    FeatureVector {
        planes,
        image_id: format!("f{seed}"),
    }
}

fn examples() -> Vec<(FeatureVector, usize)> {
    (0..12).map(|i| (feature(if i % 2 == 0 { 0.1 } else { 0.8 }, i), (i % 2) as usize)).collect()
}

fn config(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 30,
        learning_rate: 0.05,
        momentum: 0.8,
        batch_size: 4,
        seed,
    }
}

#[test]
fn label_with_one_example_rejected_by_name() {
    let mut ex = examples();
    ex.retain(|(_, l)| *l == 0);
    ex.push((feature(0.8, 99), 1));
    let err = train_attribute_model(&ex, &toy_network([5, 8, 8], 2), &scheme(), &config(0), &mut NoObserver).unwrap_err();
    assert!(matches!(err, Error::InvalidArgument(ref m) if m.contains("`male`")), "{err}");
}

#[test]
fn zero_model_is_indifferent() {
    let model = AttributeModel::new(Network::zeros(&toy_network([5, 8, 8], 2)).unwrap(), scheme()).unwrap();
    let out = classify(&model, &feature(0.5, 1)).unwrap();
    assert_eq!(out.probabilities, [0.5, 0.5]);
    assert_eq!((out.label, out.name.as_str()), (0, "female"));
}

#[test]
fn wrong_channel_count_rejected() {
    assert!(AttributeModel::new(Network::zeros(&toy_network([3, 8, 8], 2)).unwrap(), scheme()).is_err());
    assert!(AttributeModel::new(Network::zeros(&toy_network([5, 8, 8], 3)).unwrap(), scheme()).is_err());
}

#[test]
fn separable_labels_are_learned_deterministically() {
    let spec = toy_network([5, 8, 8], 2);
    let (a, ha) = train_attribute_model(&examples(), &spec, &scheme(), &config(4), &mut NoObserver).unwrap();
    let (b, hb) = train_attribute_model(&examples(), &spec, &scheme(), &config(4), &mut NoObserver).unwrap();
    assert_eq!(ha, hb);
    let meta = CheckpointMeta::default();
    assert_eq!(a.to_checkpoint(meta.clone()).unwrap(), b.to_checkpoint(meta.clone()).unwrap());
    for (i, (f, label)) in examples().iter().enumerate() {
        assert_eq!(classify(&a, f).unwrap().label, *label, "example {i}");
    }
    let (restored, restored_meta) = AttributeModel::from_checkpoint(&a.to_checkpoint(meta).unwrap()).unwrap();
    assert_eq!(restored.scheme, scheme());
    assert_eq!(restored_meta.labels, Some(scheme()));
}
