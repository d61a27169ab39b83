//! Deterministic synthetic-data generators. Every randomized test
//! fixture in the crate comes from here, driven by the pinned
//! [`SplitMix64`] stream so that a `(spec, seed)` pair reproduces
//! bit-identical data on any platform.

use nalgebra::{Unit, UnitQuaternion, Vector3};

use crate::geometry::{Homography, Point2, PoseSE3, Trajectory};
use crate::matching::{Correspondence, Descriptor, Feature, FeatureSet, DESCRIPTOR_DIM};
use crate::rng::SplitMix64;

/// Specification of a synthetic two-view matching scene.
#[derive(Debug, Clone)]
pub struct SceneSpec {
    /// Planted ground-truth homography from frame A to frame B.
    pub homography: Homography,
    pub feature_count: usize,
    /// Gaussian pixel noise applied to true correspondences in frame B.
    pub inlier_noise_sigma: f64,
    /// Fraction of pairs whose frame-B points are uniform clutter.
    pub outlier_fraction: f64,
    /// Gaussian noise added to true-pair descriptors before renormalizing.
    pub descriptor_noise_sigma: f64,
    /// Minimum separation enforced between frame-A locations (0 = off).
    pub min_spacing: f64,
    pub width: f64,
    pub height: f64,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            homography: Homography::identity(),
            feature_count: 200,
            inlier_noise_sigma: 0.5,
            outlier_fraction: 0.0,
            descriptor_noise_sigma: 0.05,
            min_spacing: 0.0,
            width: 752.0,
            height: 480.0,
            seed: 0,
        }
    }
}

impl SceneSpec {
    /// Homography induced by a second view of a plane: `K (R - t n^T / d) K^-1`
    /// with rotation `R`, translation `t`, plane normal `n`, and plane
    /// distance `d` in the first camera frame.
    pub fn two_view_homography(
        intrinsics: &crate::geometry::Intrinsics,
        rotation: &UnitQuaternion<f64>,
        translation: &Vector3<f64>,
        plane_normal: &Unit<Vector3<f64>>,
        plane_distance: f64,
    ) -> Result<Homography, crate::geometry::GeometryError> {
        assert!(plane_distance.abs() > 1e-12, "plane through the camera center");
        let k = nalgebra::Matrix3::new(
            intrinsics.fx,
            0.0,
            intrinsics.cx,
            0.0,
            intrinsics.fy,
            intrinsics.cy,
            0.0,
            0.0,
            1.0,
        );
        let k_inv = k.try_inverse().expect("intrinsics matrix is invertible");
        let m = rotation.to_rotation_matrix().into_inner()
            - translation * plane_normal.into_inner().transpose() / plane_distance;
        Homography::from_matrix(&(k * m * k_inv))
    }
}

/// A generated two-view scene with ground-truth labels. Pair `i` is
/// `set_a.features[i] <-> set_b.features[i]`.
#[derive(Debug, Clone)]
pub struct MatchedScene {
    pub set_a: FeatureSet,
    pub set_b: FeatureSet,
    /// `true` where pair `i` is a genuine correspondence.
    pub inlier_labels: Vec<bool>,
    pub truth: Homography,
}

impl MatchedScene {
    /// Ground-truth pairing as RANSAC input (pixel coordinates).
    pub fn correspondences(&self) -> Vec<Correspondence> {
        (0..self.set_a.len())
            .map(|i| {
                let fa = &self.set_a.features[i];
                let fb = &self.set_b.features[i];
                Correspondence {
                    index_a: i,
                    index_b: i,
                    point_a: fa.location,
                    point_b: fb.location,
                    similarity: fa.descriptor.dot(&fb.descriptor),
                }
            })
            .collect()
    }
}

/// A mildly perspective homography used as a stock planted model.
pub fn mild_homography() -> Homography {
    Homography::from_coeffs([
        1.05, 0.08, 12.0, -0.06, 0.98, -7.0, 3.0e-5, -2.0e-5, 1.0,
    ])
    .expect("stock homography is valid")
}

fn random_unit_descriptor(rng: &mut SplitMix64) -> Descriptor {
    let values: Vec<f32> = (0..DESCRIPTOR_DIM)
        .map(|_| rng.next_gaussian() as f32)
        .collect();
    Descriptor::normalized(&values).expect("gaussian vector has nonzero norm")
}

fn perturbed_descriptor(base: &Descriptor, sigma: f64, rng: &mut SplitMix64) -> Descriptor {
    let values: Vec<f32> = base
        .values()
        .iter()
        .map(|&v| v + (sigma * rng.next_gaussian()) as f32)
        .collect();
    Descriptor::normalized(&values).expect("perturbed descriptor has nonzero norm")
}

fn sample_locations(
    count: usize,
    width: f64,
    height: f64,
    min_spacing: f64,
    rng: &mut SplitMix64,
) -> Vec<Point2> {
    let mut points: Vec<Point2> = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while points.len() < count {
        attempts += 1;
        assert!(
            attempts < 1000 * count.max(1),
            "cannot place {count} points with spacing {min_spacing} in {width}x{height}"
        );
        let p = Point2::pixel(rng.next_range(0.0, width), rng.next_range(0.0, height));
        if min_spacing > 0.0 && points.iter().any(|q| q.distance(&p) < min_spacing) {
            continue;
        }
        points.push(p);
    }
    points
}

/// Generate a two-view scene with planted homography, labeled outliers,
/// and noisy descriptors.
///
/// Draw order for a fixed seed: frame-A locations, the outlier-label
/// shuffle, then per pair the scores, frame-A descriptor, frame-B point
/// (noise or clutter), and frame-B descriptor.
pub fn gen_matched_scene(spec: &SceneSpec) -> MatchedScene {
    assert!(
        (0.0..1.0).contains(&spec.outlier_fraction),
        "outlier fraction must lie in [0, 1)"
    );
    let n = spec.feature_count;
    let mut rng = SplitMix64::new(spec.seed);

    let locations_a = sample_locations(n, spec.width, spec.height, spec.min_spacing, &mut rng);

    let outlier_count = (n as f64 * spec.outlier_fraction).round() as usize;
    let mut labels = vec![true; n];
    for l in labels.iter_mut().take(outlier_count) {
        *l = false;
    }
    rng.shuffle(&mut labels);

    let mut features_a = Vec::with_capacity(n);
    let mut features_b = Vec::with_capacity(n);
    for (i, &loc_a) in locations_a.iter().enumerate() {
        let score_a = rng.next_f64();
        let score_b = rng.next_f64();
        let desc_a = random_unit_descriptor(&mut rng);
        let (loc_b, desc_b) = if labels[i] {
            let mapped = spec
                .homography
                .apply(loc_a)
                .expect("planted homography maps the image plane");
            let loc_b = Point2::pixel(
                mapped.u + spec.inlier_noise_sigma * rng.next_gaussian(),
                mapped.v + spec.inlier_noise_sigma * rng.next_gaussian(),
            );
            let desc_b = perturbed_descriptor(&desc_a, spec.descriptor_noise_sigma, &mut rng);
            (loc_b, desc_b)
        } else {
            let loc_b = Point2::pixel(
                rng.next_range(0.0, spec.width),
                rng.next_range(0.0, spec.height),
            );
            (loc_b, random_unit_descriptor(&mut rng))
        };
        features_a.push(Feature::new(loc_a, score_a, desc_a));
        features_b.push(Feature::new(loc_b, score_b, desc_b));
    }

    MatchedScene {
        set_a: FeatureSet::new(0, 0.0, features_a),
        set_b: FeatureSet::new(1, 0.1, features_b),
        inlier_labels: labels,
        truth: spec.homography,
    }
}

/// A random frame: uniform locations, uniform scores, random unit
/// descriptors.
pub fn gen_feature_set(
    frame_id: u64,
    timestamp: f64,
    count: usize,
    width: f64,
    height: f64,
    min_spacing: f64,
    seed: u64,
) -> FeatureSet {
    let mut rng = SplitMix64::new(seed);
    let locations = sample_locations(count, width, height, min_spacing, &mut rng);
    let features = locations
        .into_iter()
        .map(|loc| {
            let score = rng.next_f64();
            let desc = random_unit_descriptor(&mut rng);
            Feature::new(loc, score, desc)
        })
        .collect();
    FeatureSet::new(frame_id, timestamp, features)
}

/// Re-observation of `base` from (approximately) the same viewpoint:
/// same features with Gaussian pixel noise and perturbed, renormalized
/// descriptors. Scores are kept.
pub fn gen_revisit_features(
    base: &FeatureSet,
    frame_id: u64,
    timestamp: f64,
    pixel_noise_sigma: f64,
    descriptor_noise_sigma: f64,
    seed: u64,
) -> FeatureSet {
    let mut rng = SplitMix64::new(seed);
    let features = base
        .features
        .iter()
        .map(|f| {
            let loc = Point2::pixel(
                f.location.u + pixel_noise_sigma * rng.next_gaussian(),
                f.location.v + pixel_noise_sigma * rng.next_gaussian(),
            );
            let desc = perturbed_descriptor(&f.descriptor, descriptor_noise_sigma, &mut rng);
            Feature::new(loc, f.score, desc)
        })
        .collect();
    FeatureSet::new(frame_id, timestamp, features)
}

/// Clustered unit descriptors for vocabulary tests: `centers` blob
/// directions, `per_center` noisy members each. Returns the descriptors
/// and their blob labels.
pub fn gen_descriptor_blobs(
    centers: usize,
    per_center: usize,
    spread: f64,
    seed: u64,
) -> (Vec<Descriptor>, Vec<usize>) {
    let mut rng = SplitMix64::new(seed);
    let blob_centers: Vec<Descriptor> =
        (0..centers).map(|_| random_unit_descriptor(&mut rng)).collect();
    let mut descriptors = Vec::with_capacity(centers * per_center);
    let mut labels = Vec::with_capacity(centers * per_center);
    for (c, center) in blob_centers.iter().enumerate() {
        for _ in 0..per_center {
            descriptors.push(perturbed_descriptor(center, spread, &mut rng));
            labels.push(c);
        }
    }
    (descriptors, labels)
}

/// A drifted loop trajectory with ground truth.
#[derive(Debug, Clone)]
pub struct DriftScenario {
    pub ground_truth: Trajectory,
    pub drifted: Trajectory,
    /// Revisit pairs `(early, late)` whose ground-truth positions
    /// coincide (the closing of the loop).
    pub loop_pairs: Vec<(usize, usize)>,
}

/// Ground truth on a closed circle plus a drifted copy.
///
/// Node `i` of `n` sits at angle `2*pi*i/(n-1)` on a circle of
/// `circle_radius` meters, headed along the tangent, so the last node
/// revisits the first. The drifted trajectory offsets node `i` by
/// `(i+1) * per_step_drift` meters along one random direction drawn per
/// seed, so the endpoint error is exactly `n * per_step_drift`.
pub fn gen_drift_trajectory(
    n: usize,
    circle_radius: f64,
    per_step_drift: f64,
    seed: u64,
) -> DriftScenario {
    assert!(n >= 10, "need at least 10 nodes, got {n}");
    let mut rng = SplitMix64::new(seed);
    let psi = rng.next_range(0.0, std::f64::consts::TAU);
    let drift_dir = Vector3::new(psi.cos(), psi.sin(), 0.0);

    let mut gt = Vec::with_capacity(n);
    let mut drifted = Vec::with_capacity(n);
    for i in 0..n {
        let theta = std::f64::consts::TAU * i as f64 / (n - 1) as f64;
        let position = Vector3::new(circle_radius * theta.cos(), circle_radius * theta.sin(), 0.0);
        let heading = UnitQuaternion::from_axis_angle(
            &Vector3::z_axis(),
            theta + std::f64::consts::FRAC_PI_2,
        );
        let t = i as f64 * 0.1;
        gt.push(PoseSE3::new(t, heading, position));
        drifted.push(PoseSE3::new(
            t,
            heading,
            position + drift_dir * (per_step_drift * (i + 1) as f64),
        ));
    }

    // Revisits: non-adjacent node pairs whose true positions coincide
    // within a quarter of the inter-node spacing.
    let spacing = std::f64::consts::TAU * circle_radius / (n - 1) as f64;
    let revisit_radius = 0.25 * spacing;
    let mut loop_pairs = Vec::new();
    for i in 0..n {
        for j in (i + n / 2)..n {
            if (gt[i].translation - gt[j].translation).norm() <= revisit_radius {
                loop_pairs.push((i, j));
            }
        }
    }

    DriftScenario {
        ground_truth: Trajectory::new(gt).expect("synthetic timestamps increase"),
        drifted: Trajectory::new(drifted).expect("synthetic timestamps increase"),
        loop_pairs,
    }
}

/// Per-keyframe feature sets for a [`DriftScenario`]: every node sees its
/// own random scene except revisit targets, which re-observe the earlier
/// node's scene with pixel and descriptor noise. Timestamps follow the
/// scenario; frame ids are node indices.
pub fn gen_loop_closure_keyframes(
    scenario: &DriftScenario,
    features_per_frame: usize,
    pixel_noise_sigma: f64,
    descriptor_noise_sigma: f64,
    seed: u64,
) -> Vec<FeatureSet> {
    let n = scenario.ground_truth.len();
    let revisit_of: std::collections::HashMap<usize, usize> = scenario
        .loop_pairs
        .iter()
        .map(|&(early, late)| (late, early))
        .collect();
    let mut sets: Vec<FeatureSet> = Vec::with_capacity(n);
    for i in 0..n {
        let t = scenario.ground_truth[i].timestamp;
        let set = match revisit_of.get(&i) {
            Some(&earlier) => gen_revisit_features(
                &sets[earlier],
                i as u64,
                t,
                pixel_noise_sigma,
                descriptor_noise_sigma,
                SplitMix64::child_seed(seed, 1_000_000 + i as u64),
            ),
            None => gen_feature_set(
                i as u64,
                t,
                features_per_frame,
                752.0,
                480.0,
                4.0,
                SplitMix64::child_seed(seed, i as u64),
            ),
        };
        sets.push(set);
    }
    sets
}
