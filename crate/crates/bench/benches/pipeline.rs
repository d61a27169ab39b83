use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use nalgebra::Matrix6;
use visloop_core::loopgraph::{optimize, LoopEdge, OptimizeParams, PoseGraph};
use visloop_core::placedb::{Keyframe, KeyframeDatabase, QueryParams};
use visloop_core::synth::{
    gen_drift_trajectory, gen_feature_set, gen_matched_scene, mild_homography, SceneSpec,
};
use visloop_core::vocab::train_vocabulary;
use visloop_core::{
    enhance_matches, mask_filter, match_descriptors, ransac_homography, MatchConfig, PoseSE3,
};

fn matching_config() -> MatchConfig {
    MatchConfig {
        inlier_threshold: 1.5,
        ..MatchConfig::default()
    }
}

fn bench_mask_filter(c: &mut Criterion) {
    let set = gen_feature_set(0, 0.0, 1000, 752.0, 480.0, 0.0, 1);
    c.bench_function("mask_filter_1000", |b| {
        b.iter(|| mask_filter(&set, 8.0));
    });
}

fn bench_match_descriptors(c: &mut Criterion) {
    let scene = gen_matched_scene(&SceneSpec {
        homography: mild_homography(),
        feature_count: 1000,
        outlier_fraction: 0.2,
        seed: 2,
        ..SceneSpec::default()
    });
    c.bench_function("match_descriptors_1000x1000", |b| {
        b.iter(|| match_descriptors(&scene.set_a, &scene.set_b, 0.0));
    });
}

fn bench_ransac(c: &mut Criterion) {
    let scene = gen_matched_scene(&SceneSpec {
        homography: mild_homography(),
        feature_count: 200,
        inlier_noise_sigma: 0.5,
        outlier_fraction: 0.5,
        seed: 3,
        ..SceneSpec::default()
    });
    let pairs = scene.correspondences();
    let config = matching_config();
    let mut seed = 0u64;
    c.bench_function("ransac_200_pairs_50pct_outliers", |b| {
        b.iter(|| {
            seed = seed.wrapping_add(1);
            ransac_homography(&pairs, &config, seed).unwrap()
        });
    });
}

fn bench_enhance_matches(c: &mut Criterion) {
    let scene = gen_matched_scene(&SceneSpec {
        homography: mild_homography(),
        feature_count: 1000,
        inlier_noise_sigma: 0.5,
        outlier_fraction: 0.2,
        seed: 4,
        ..SceneSpec::default()
    });
    let config = matching_config();
    let mut seed = 0u64;
    c.bench_function("enhance_matches_1000", |b| {
        b.iter(|| {
            seed = seed.wrapping_add(1);
            enhance_matches(&scene.set_a, &scene.set_b, &config, seed).unwrap()
        });
    });
}

fn bench_vocab(c: &mut Criterion) {
    let corpus: Vec<_> = (0..100u64)
        .map(|i| gen_feature_set(i, i as f64, 50, 752.0, 480.0, 0.0, 500 + i))
        .collect();
    let tree = train_vocabulary(&corpus, 10, 3, 7).unwrap();
    let probe = gen_feature_set(0, 0.0, 200, 752.0, 480.0, 0.0, 999);
    c.bench_function("bow_transform_200_features", |b| {
        b.iter(|| tree.transform(&probe));
    });

    let mut db = KeyframeDatabase::new();
    for set in &corpus {
        db.add_keyframe(Keyframe {
            timestamp: set.timestamp,
            bow: tree.transform(set),
            features: set.clone(),
            pose: PoseSE3::identity(set.timestamp),
        });
    }
    let bow = tree.transform(&probe);
    let params = QueryParams {
        top_n: 5,
        min_gap_keyframes: 0,
        min_score_ratio: None,
    };
    c.bench_function("db_query_100_keyframes", |b| {
        b.iter(|| db.query(&bow, &params));
    });
}

fn bench_pose_graph(c: &mut Criterion) {
    let scenario = gen_drift_trajectory(100, 10.0, 0.012, 5);
    let n = scenario.drifted.len();
    let build = || {
        let mut graph = PoseGraph::new();
        for (i, p) in scenario.drifted.iter().enumerate() {
            graph.add_node(i as u64, *p);
        }
        for i in 0..n - 1 {
            let z = scenario.drifted[i].inverse().compose(&scenario.drifted[i + 1]);
            graph
                .add_sequential_edge(i as u64, i as u64 + 1, z, Matrix6::identity() * 100.0)
                .unwrap();
        }
        graph
            .add_loop_edge(&LoopEdge {
                from: 0,
                to: n as u64 - 1,
                relative: PoseSE3::identity(0.0),
                information: Matrix6::identity() * 100.0,
                inlier_count: 100,
            })
            .unwrap();
        graph
    };
    c.bench_function("optimize_100_node_circle", |b| {
        b.iter_batched(
            build,
            |graph| optimize(&graph, 0, &OptimizeParams::default()).unwrap(),
            BatchSize::LargeInput,
        );
    });
}

criterion_group!(
    benches,
    bench_mask_filter,
    bench_match_descriptors,
    bench_ransac,
    bench_enhance_matches,
    bench_vocab,
    bench_pose_graph
);
criterion_main!(benches);
