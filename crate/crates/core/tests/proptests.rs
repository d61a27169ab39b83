//! Property tests: projective and pose invariants, serialization round
//! trips, and the no-panic guarantee of every parser on arbitrary bytes.

use proptest::prelude::*;

use visloop_core::io::{
    decode_features, decode_vocabulary, encode_features, encode_vocabulary,
    parse_trajectory_euroc_csv, parse_trajectory_tum,
};
use visloop_core::synth::{gen_feature_set, SceneSpec};
use visloop_core::vocab::BowVector;
use visloop_core::{score, train_vocabulary, Homography, Point2, PoseSE3};

fn mild_projective(
    scale: f64,
    angle: f64,
    tx: f64,
    ty: f64,
    p7: f64,
    p8: f64,
) -> Option<Homography> {
    let (s, c) = angle.sin_cos();
    Homography::from_coeffs([
        scale * c,
        -scale * s,
        tx,
        scale * s,
        scale * c,
        ty,
        p7,
        p8,
        1.0,
    ])
    .ok()
}

proptest! {
    #[test]
    fn identity_homography_is_the_identity_map(
        u in -1e6..1e6f64,
        v in -1e6..1e6f64,
    ) {
        let p = Point2::pixel(u, v);
        prop_assert_eq!(Homography::identity().apply(p).unwrap(), p);
    }

    #[test]
    fn homography_inverse_round_trips_points(
        scale in 0.5..2.0f64,
        angle in -1.0..1.0f64,
        tx in -100.0..100.0f64,
        ty in -100.0..100.0f64,
        p7 in -1e-4..1e-4f64,
        p8 in -1e-4..1e-4f64,
        u in 0.0..752.0f64,
        v in 0.0..480.0f64,
    ) {
        let Some(h) = mild_projective(scale, angle, tx, ty, p7, p8) else {
            return Ok(());
        };
        prop_assume!(h.determinant().abs() > 1e-9);
        let inv = h.inverse().unwrap();
        let p = Point2::pixel(u, v);
        if let (Ok(q), ) = (h.apply(p), ) {
            if let Ok(back) = inv.apply(q) {
                prop_assert!(back.distance(&p) < 1e-9 * (1.0 + u.abs() + v.abs()));
            }
        }
    }

    #[test]
    fn pose_exp_log_round_trip(
        rx in -2.5..2.5f64,
        ry in -2.5..2.5f64,
        rz in -2.5..2.5f64,
        tx in -20.0..20.0f64,
        ty in -20.0..20.0f64,
        tz in -20.0..20.0f64,
    ) {
        let phi = nalgebra::Vector3::new(rx, ry, rz);
        prop_assume!(phi.norm() < std::f64::consts::PI - 1e-3);
        let xi = nalgebra::Vector6::new(tx, ty, tz, rx, ry, rz);
        let t = PoseSE3::exp(&xi);
        let back = PoseSE3::exp(&t.log());
        let diff = t.inverse().compose(&back);
        prop_assert!(diff.translation_norm() + diff.rotation_angle() < 1e-9);
    }

    #[test]
    fn feature_files_round_trip_bit_exact(seed in any::<u64>(), n in 0usize..40) {
        let set = gen_feature_set(0, 1.5, n, 752.0, 480.0, 0.0, seed);
        let bytes = encode_features(&set);
        let back = decode_features(&bytes, "prop").unwrap();
        prop_assert_eq!(encode_features(&back), bytes);
    }

    #[test]
    fn feature_parser_never_panics_on_noise(bytes in proptest::collection::vec(any::<u8>(), 0..4096)) {
        let _ = decode_features(&bytes, "fuzz");
    }

    #[test]
    fn feature_parser_never_panics_on_corruption(
        seed in any::<u64>(),
        flip in 0usize..100_000,
        mask in 1u8..=255,
    ) {
        let set = gen_feature_set(0, 1.5, 8, 752.0, 480.0, 0.0, seed);
        let mut bytes = encode_features(&set);
        let idx = flip % bytes.len();
        bytes[idx] ^= mask;
        let _ = decode_features(&bytes, "fuzz");
    }

    #[test]
    fn vocab_parser_never_panics_on_noise(bytes in proptest::collection::vec(any::<u8>(), 0..4096)) {
        let _ = decode_vocabulary(&bytes, "fuzz");
    }

    #[test]
    fn trajectory_parsers_never_panic(text in "\\PC*") {
        let _ = parse_trajectory_tum(&text, "fuzz");
        let _ = parse_trajectory_euroc_csv(&text, "fuzz");
    }

    #[test]
    fn bow_vectors_are_normalized_and_scores_bounded(
        wa in proptest::collection::vec((0u32..500, 1e-6..10.0f64), 1..40),
        wb in proptest::collection::vec((0u32..500, 1e-6..10.0f64), 1..40),
    ) {
        let a = BowVector::from_raw_weights(wa);
        let b = BowVector::from_raw_weights(wb);
        prop_assert!((a.l1_norm() - 1.0).abs() < 1e-9);
        let s = score(&a, &b);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert!((s - score(&b, &a)).abs() < 1e-12);
        prop_assert_eq!(score(&a, &a), 1.0);
    }
}

// Scene generation is pure: identical specs give identical bytes, and the
// vocabulary file round trip is exact for trained trees.
proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn scene_and_vocab_round_trips(seed in any::<u64>()) {
        let scene = visloop_core::synth::gen_matched_scene(&SceneSpec {
            feature_count: 30,
            seed,
            ..SceneSpec::default()
        });
        let again = visloop_core::synth::gen_matched_scene(&SceneSpec {
            feature_count: 30,
            seed,
            ..SceneSpec::default()
        });
        prop_assert_eq!(&scene.set_a, &again.set_a);

        let corpus: Vec<_> = (0..6)
            .map(|i| gen_feature_set(i, i as f64, 20, 752.0, 480.0, 0.0, seed.wrapping_add(i)))
            .collect();
        let tree = train_vocabulary(&corpus, 3, 2, seed).unwrap();
        let bytes = encode_vocabulary(&tree);
        let back = decode_vocabulary(&bytes, "prop").unwrap();
        prop_assert_eq!(encode_vocabulary(&back), bytes);
    }
}
