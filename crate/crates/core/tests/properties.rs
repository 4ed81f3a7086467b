use faceparse::dataio::{make_folds, resize_mask};
use faceparse::faceseg::{LabelMask, ProbabilityMaps, CLASS_COUNT};
use faceparse::netkit::{argmax, decode_checkpoint, encode_checkpoint, toy_network, CheckpointMeta, Network};
use faceparse::tensor::softmax;
use proptest::prelude::*;

fn mask_strategy() -> impl Strategy<Value = LabelMask> {
    (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
        proptest::collection::vec(0u8..CLASS_COUNT as u8, w * h).prop_map(move |d| LabelMask::new(w, h, d).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn folds_always_partition(labels in proptest::collection::vec(prop::option::of(0usize..3), 1..80), k in 1usize..12, seed: u64) {
        prop_assume!(k <= labels.len());
        let plan = make_folds(&labels, k, seed).unwrap();
        prop_assert_eq!(plan.assignment.len(), labels.len());
        prop_assert!(plan.assignment.iter().all(|&f| f < k));
        let sizes = plan.sizes();
        prop_assert_eq!(sizes.iter().sum::<usize>(), labels.len());
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn mask_resizing_never_invents_classes(mask in mask_strategy(), h in 1usize..20, w in 1usize..20) {
        let present = mask.classes_present();
        let out = resize_mask(&mask, h, w).unwrap();
        prop_assert!(out.data().iter().all(|v| present.contains(v)));
    }

    #[test]
    fn argmax_ignores_a_constant_shift(logits in proptest::collection::vec(-20.0f64..20.0, 2..8), shift in -50.0f64..50.0) {
        let shifted: Vec<f64> = logits.iter().map(|v| v + shift).collect();
        prop_assert_eq!(argmax(&softmax(&logits)), argmax(&softmax(&shifted)));
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_hot_sidecar_round_trip(mask in mask_strategy()) {
        let pms = ProbabilityMaps::one_hot(&mask);
        let back = ProbabilityMaps::from_sidecar(&pms.to_sidecar().unwrap()).unwrap();
        prop_assert_eq!(back.planes(), pms.planes());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn checkpoints_round_trip_bitwise(seed: u64) {
        let spec = toy_network([3, 9, 9], 7);
        let net: Network<f64> = Network::init(&spec, seed).unwrap();
        let bytes = encode_checkpoint(&net, &CheckpointMeta::default()).unwrap();
        let (back, _) = decode_checkpoint(&bytes, Some(&spec)).unwrap();
        prop_assert_eq!(encode_checkpoint(&back, &CheckpointMeta::default()).unwrap(), bytes);
    }
}
