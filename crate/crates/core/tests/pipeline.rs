//! Integration of the retrieval -> verification -> optimization pipeline
//! on synthetic drift scenarios.

use visloop_core::evaluation::{ate, AlignMode};
use visloop_core::loopgraph::{close_loops, LoopCloseConfig, VerifyConfig};
use visloop_core::placedb::{Keyframe, KeyframeDatabase, QueryParams};
use visloop_core::synth::{
    gen_drift_trajectory, gen_feature_set, gen_loop_closure_keyframes, gen_revisit_features,
};
use visloop_core::vocab::train_vocabulary;
use visloop_core::{geometric_verify, MatchConfig, VocabularyTree};

fn pipeline_match_config() -> MatchConfig {
    MatchConfig {
        inlier_threshold: 1.5,
        // Unrelated frames produce only weak mutual-NN similarities;
        // gating them keeps failed verifications cheap.
        min_similarity: 0.5,
        ..MatchConfig::default()
    }
}

fn pipeline_config() -> LoopCloseConfig {
    LoopCloseConfig {
        query: QueryParams {
            top_n: 5,
            min_gap_keyframes: 30,
            min_score_ratio: None,
        },
        verify: VerifyConfig {
            match_config: pipeline_match_config(),
            ..VerifyConfig::default()
        },
        ..LoopCloseConfig::default()
    }
}

// Retrieval needs far more words than features per frame for word
// overlap to discriminate places: with k=10, L=3 two random frames share
// a sliver of the vocabulary while a revisit reuses almost all its words.
fn shared_vocabulary() -> VocabularyTree {
    let corpus: Vec<_> = (0..40)
        .map(|i| gen_feature_set(i, i as f64, 60, 752.0, 480.0, 0.0, 31_000 + i))
        .collect();
    train_vocabulary(&corpus, 10, 3, 7).unwrap()
}

#[test]
fn revisit_verification_succeeds_across_seeds() {
    let mut accepted = 0u32;
    let runs = 100;
    for seed in 0..runs {
        let base = gen_feature_set(0, 0.0, 150, 752.0, 480.0, 4.0, 50_000 + seed);
        let revisit = gen_revisit_features(&base, 1, 9.9, 0.5, 0.05, 60_000 + seed);
        let older = visloop_core::KeyframeRecord {
            id: 0,
            timestamp: 0.0,
            bow: visloop_core::BowVector::default(),
            features: base,
            pose: visloop_core::PoseSE3::identity(0.0),
        };
        let newer = visloop_core::KeyframeRecord {
            id: 99,
            timestamp: 9.9,
            bow: visloop_core::BowVector::default(),
            features: revisit,
            pose: visloop_core::PoseSE3::identity(9.9),
        };
        let config = VerifyConfig {
            match_config: pipeline_match_config(),
            ..VerifyConfig::default()
        };
        if let Some(edge) = geometric_verify(&newer, &older, &config, seed) {
            assert!(edge.inlier_count >= 25);
            accepted += 1;
        }
    }
    assert!(accepted >= 95, "revisits verified in only {accepted}/{runs} seeds");
}

#[test]
fn close_loops_corrects_a_drifted_circle() {
    let seed = 11u64;
    let scenario = gen_drift_trajectory(100, 10.0, 0.012, seed);
    let keyframes = gen_loop_closure_keyframes(&scenario, 150, 0.5, 0.02, seed);
    let tree = shared_vocabulary();

    let mut db = KeyframeDatabase::new();
    for (set, pose) in keyframes.iter().zip(scenario.drifted.iter()) {
        db.add_keyframe(Keyframe {
            timestamp: set.timestamp,
            bow: tree.transform(set),
            features: set.clone(),
            pose: *pose,
        });
    }

    let outcome = close_loops(&db, &pipeline_config(), seed).unwrap();
    assert!(
        outcome.edges.iter().any(|e| e.from == 0 && e.to == 99),
        "closure edge between the revisit pair not found: {:?}",
        outcome
            .edges
            .iter()
            .map(|e| (e.from, e.to))
            .collect::<Vec<_>>()
    );
    let optimization = outcome.optimization.as_ref().expect("optimization ran");
    assert!(optimization.final_cost <= optimization.initial_cost);

    let n = scenario.ground_truth.len();
    let endpoint_before = (scenario.drifted[n - 1].translation
        - scenario.ground_truth[n - 1].translation)
        .norm();
    let endpoint_after = (outcome.corrected[n - 1].translation
        - scenario.ground_truth[n - 1].translation)
        .norm();
    assert!(
        endpoint_after <= 0.2 * endpoint_before,
        "endpoint error {endpoint_before:.3} m only reduced to {endpoint_after:.3} m"
    );

    let before = ate(&scenario.drifted, &scenario.ground_truth, AlignMode::None, 0.02).unwrap();
    let after = ate(&outcome.corrected, &scenario.ground_truth, AlignMode::None, 0.02).unwrap();
    assert!(
        after.rmse <= 0.5 * before.rmse,
        "ate rmse {:.4} -> {:.4}",
        before.rmse,
        after.rmse
    );

    // Corrected trajectory keeps the original timestamps.
    for (a, b) in outcome.corrected.iter().zip(scenario.drifted.iter()) {
        assert_eq!(a.timestamp, b.timestamp);
    }
}

#[test]
fn close_loops_without_revisits_is_a_passthrough() {
    let scenario = gen_drift_trajectory(40, 10.0, 0.01, 3);
    // Unique scenes everywhere: strip the loop pairs before generating.
    let no_loops = visloop_core::synth::DriftScenario {
        loop_pairs: Vec::new(),
        ..scenario.clone()
    };
    let keyframes = gen_loop_closure_keyframes(&no_loops, 80, 0.5, 0.02, 9);
    let tree = shared_vocabulary();
    let mut db = KeyframeDatabase::new();
    for (set, pose) in keyframes.iter().zip(no_loops.drifted.iter()) {
        db.add_keyframe(Keyframe {
            timestamp: set.timestamp,
            bow: tree.transform(set),
            features: set.clone(),
            pose: *pose,
        });
    }
    let outcome = close_loops(&db, &pipeline_config(), 3).unwrap();
    assert!(outcome.edges.is_empty());
    assert!(outcome.optimization.is_none());
    for (a, b) in outcome.corrected.iter().zip(no_loops.drifted.iter()) {
        assert_eq!(a.translation, b.translation);
    }
}
