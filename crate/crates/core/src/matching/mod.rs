//! Feature-matching enhancement pipeline: spatial mask filtering of
//! detected features, mutual-nearest-neighbor descriptor association,
//! and homography RANSAC with a tightened inlier threshold.
//!
//! The stages compose in [`enhance_matches`]: a small mask radius keeps
//! the candidate set dense, and a low RANSAC threshold then keeps only
//! correspondences whose transfer error through the fitted homography is
//! small, trading raw match count for match quality.

mod dlt;
mod ransac;

pub use dlt::dlt_homography;
pub use ransac::ransac_homography;

use std::collections::HashMap;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::geometry::{GeometryError, Homography, Intrinsics, Point2, PointUnit};

/// Length of every feature descriptor handled by this crate.
pub const DESCRIPTOR_DIM: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatchError {
    #[error("need at least {needed} correspondences, got {got}")]
    InsufficientMatches { needed: usize, got: usize },
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("no consensus: best inlier count {best} is below the minimum {min}")]
    NoConsensus { best: usize, min: usize },
    #[error("descriptor must have {DESCRIPTOR_DIM} entries, got {0}")]
    BadDescriptorLength(usize),
    #[error("descriptor norm {0} is not unit (or not normalizable)")]
    BadDescriptorNorm(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A unit-norm 256-d feature descriptor, stored as `f32` to match the
/// on-disk format.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor(Box<[f32; DESCRIPTOR_DIM]>);

impl Descriptor {
    /// Wrap raw values, requiring unit L2 norm within 1e-6.
    pub fn from_slice(values: &[f32]) -> Result<Self, MatchError> {
        if values.len() != DESCRIPTOR_DIM {
            return Err(MatchError::BadDescriptorLength(values.len()));
        }
        let norm = values.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
        if (norm - 1.0).abs() >= 1e-6 {
            return Err(MatchError::BadDescriptorNorm(norm));
        }
        let mut arr = [0.0f32; DESCRIPTOR_DIM];
        arr.copy_from_slice(values);
        Ok(Self(Box::new(arr)))
    }

    /// Normalize arbitrary values to unit L2 norm. Fails on (near-)zero
    /// vectors.
    pub fn normalized(values: &[f32]) -> Result<Self, MatchError> {
        if values.len() != DESCRIPTOR_DIM {
            return Err(MatchError::BadDescriptorLength(values.len()));
        }
        let norm = values.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(MatchError::BadDescriptorNorm(norm));
        }
        let mut arr = [0.0f32; DESCRIPTOR_DIM];
        for (o, &v) in arr.iter_mut().zip(values.iter()) {
            *o = (v as f64 / norm) as f32;
        }
        // Renormalizing in f64 then rounding to f32 stays well within the
        // 1e-6 unit-norm tolerance.
        Ok(Self(Box::new(arr)))
    }

    pub fn values(&self) -> &[f32; DESCRIPTOR_DIM] {
        &self.0
    }

    /// Dot-product similarity, accumulated in f64.
    pub fn dot(&self, other: &Descriptor) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(&a, &b)| a as f64 * b as f64)
            .sum()
    }
}

/// A detected image feature: pixel location, detection score in `[0, 1]`,
/// and a unit 256-d descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub location: Point2,
    pub score: f64,
    pub descriptor: Descriptor,
}

impl Feature {
    pub fn new(location: Point2, score: f64, descriptor: Descriptor) -> Self {
        assert_eq!(location.unit, PointUnit::Pixel, "features live in pixel space");
        assert!((0.0..=1.0).contains(&score), "score {score} outside [0, 1]");
        Self {
            location,
            score,
            descriptor,
        }
    }
}

/// Ordered features of one frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureSet {
    pub frame_id: u64,
    /// Capture time in seconds.
    pub timestamp: f64,
    pub features: Vec<Feature>,
}

impl FeatureSet {
    pub fn new(frame_id: u64, timestamp: f64, features: Vec<Feature>) -> Self {
        Self {
            frame_id,
            timestamp,
            features,
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// One descriptor association between two feature sets. Indices refer to
/// the sets handed to the matcher.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchPair {
    pub index_a: usize,
    pub index_b: usize,
    pub similarity: f64,
}

/// A match pair carrying the point coordinates RANSAC operates on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub index_a: usize,
    pub index_b: usize,
    pub point_a: Point2,
    pub point_b: Point2,
    pub similarity: f64,
}

/// How the per-pair transfer error is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TransferErrorMode {
    /// Project the first frame's point onto the second and measure there.
    #[default]
    Forward,
    /// Average of the forward and backward projection errors.
    Symmetric,
}

/// Tuning knobs of the matching-enhancement pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    /// Minimum pixel separation kept between features (the mask radius).
    pub mask_radius: f64,
    /// RANSAC inlier threshold, in the units of the points fed to RANSAC:
    /// pixels without intrinsics, normalized-plane units with them.
    pub inlier_threshold: f64,
    pub max_iterations: usize,
    /// Probability that at least one all-inlier minimal sample is drawn.
    pub confidence: f64,
    /// Minimum consensus size for a model to be accepted.
    pub min_matches: usize,
    /// Mutual-nearest-neighbor pairs below this similarity are dropped.
    pub min_similarity: f64,
    pub error_mode: TransferErrorMode,
    /// With intrinsics, RANSAC runs on the normalized plane and
    /// `inlier_threshold` is interpreted there. Mask filtering always
    /// happens in pixels.
    pub intrinsics: Option<Intrinsics>,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            mask_radius: 8.0,
            inlier_threshold: 0.5,
            max_iterations: 2000,
            confidence: 0.999,
            min_matches: 8,
            min_similarity: 0.0,
            error_mode: TransferErrorMode::Forward,
            intrinsics: None,
        }
    }
}

impl MatchConfig {
    fn assert_valid(&self) {
        assert!(self.mask_radius >= 0.0, "mask radius must be >= 0");
        assert!(self.inlier_threshold > 0.0, "inlier threshold must be > 0");
        assert!(
            self.confidence > 0.0 && self.confidence < 1.0,
            "confidence must lie in (0, 1)"
        );
    }
}

/// One input pair classified by RANSAC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairOutcome {
    pub correspondence: Correspondence,
    pub transfer_error: f64,
    pub is_inlier: bool,
}

/// Result of RANSAC (and of the full enhancement pipeline): the fitted
/// homography and every candidate pair with its classification, in input
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchReport {
    pub homography: Homography,
    pub outcomes: Vec<PairOutcome>,
    pub iterations: usize,
}

impl MatchReport {
    pub fn inliers(&self) -> impl Iterator<Item = &PairOutcome> {
        self.outcomes.iter().filter(|o| o.is_inlier)
    }

    pub fn rejected(&self) -> impl Iterator<Item = &PairOutcome> {
        self.outcomes.iter().filter(|o| !o.is_inlier)
    }

    pub fn inlier_count(&self) -> usize {
        self.inliers().count()
    }

    /// Mean transfer error over surviving inliers; `None` when there are
    /// no inliers.
    pub fn mean_inlier_error(&self) -> Option<f64> {
        let (mut sum, mut n) = (0.0, 0usize);
        for o in self.inliers() {
            sum += o.transfer_error;
            n += 1;
        }
        (n > 0).then(|| sum / n as f64)
    }
}

/// Greedy minimum-separation filter ("the mask"): features are visited in
/// descending score order (ties to the lower index) and kept only if they
/// lie at least `radius` away from every feature already kept. The output
/// preserves input order. `radius = 0` keeps everything.
pub fn mask_filter(set: &FeatureSet, radius: f64) -> FeatureSet {
    let kept = mask_filter_indices(&set.features, radius);
    FeatureSet {
        frame_id: set.frame_id,
        timestamp: set.timestamp,
        features: kept.iter().map(|&i| set.features[i].clone()).collect(),
    }
}

/// Index form of [`mask_filter`]: returns the kept indices in ascending
/// order. A cell grid keeps the neighbor search local, so the result is
/// identical to the quadratic greedy scan at a fraction of the cost.
pub fn mask_filter_indices(features: &[Feature], radius: f64) -> Vec<usize> {
    assert!(radius >= 0.0, "mask radius must be >= 0");
    if radius == 0.0 || features.len() <= 1 {
        return (0..features.len()).collect();
    }

    let mut order: Vec<usize> = (0..features.len()).collect();
    order.sort_by(|&a, &b| {
        features[b]
            .score
            .partial_cmp(&features[a].score)
            .expect("scores are finite")
            .then(a.cmp(&b))
    });

    let cell = |p: Point2| -> (i64, i64) {
        ((p.u / radius).floor() as i64, (p.v / radius).floor() as i64)
    };
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut kept = Vec::new();
    'candidates: for &i in &order {
        let p = features[i].location;
        let (cx, cy) = cell(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = grid.get(&(cx + dx, cy + dy)) {
                    for &j in bucket {
                        if features[j].location.distance(&p) < radius {
                            continue 'candidates;
                        }
                    }
                }
            }
        }
        grid.entry((cx, cy)).or_default().push(i);
        kept.push(i);
    }
    kept.sort_unstable();
    kept
}

/// Mutual-nearest-neighbor descriptor matching by dot-product similarity.
/// A pair survives only if each feature is the other's best match and the
/// similarity reaches `min_similarity`. Resulting pairs are one-to-one.
pub fn match_descriptors(a: &FeatureSet, b: &FeatureSet, min_similarity: f64) -> Vec<MatchPair> {
    let idx_a: Vec<usize> = (0..a.len()).collect();
    let idx_b: Vec<usize> = (0..b.len()).collect();
    match_descriptors_indexed(a, &idx_a, b, &idx_b, min_similarity)
}

/// [`match_descriptors`] restricted to index subsets; returned pairs use
/// the original indices.
fn match_descriptors_indexed(
    a: &FeatureSet,
    idx_a: &[usize],
    b: &FeatureSet,
    idx_b: &[usize],
    min_similarity: f64,
) -> Vec<MatchPair> {
    let (na, nb) = (idx_a.len(), idx_b.len());
    if na == 0 || nb == 0 {
        return Vec::new();
    }

    // One dense similarity matrix, laid out so the product takes
    // nalgebra's blocked gemm path.
    let mut flat_a = Vec::with_capacity(na * DESCRIPTOR_DIM);
    for &i in idx_a {
        flat_a.extend_from_slice(a.features[i].descriptor.values());
    }
    let mut flat_b = Vec::with_capacity(nb * DESCRIPTOR_DIM);
    for &j in idx_b {
        flat_b.extend_from_slice(b.features[j].descriptor.values());
    }
    // Columns are descriptors, so `at^T * bt` is the similarity matrix.
    let at = DMatrix::<f32>::from_column_slice(DESCRIPTOR_DIM, na, &flat_a);
    let bt = DMatrix::<f32>::from_column_slice(DESCRIPTOR_DIM, nb, &flat_b);
    let sim = at.transpose() * bt;

    // Row and column argmaxes; strict `>` keeps the lowest index on ties.
    let mut best_for_a: Vec<(usize, f32)> = vec![(0, f32::NEG_INFINITY); na];
    let mut best_for_b: Vec<(usize, f32)> = vec![(0, f32::NEG_INFINITY); nb];
    for i in 0..na {
        for j in 0..nb {
            let s = sim[(i, j)];
            if s > best_for_a[i].1 {
                best_for_a[i] = (j, s);
            }
            if s > best_for_b[j].1 {
                best_for_b[j] = (i, s);
            }
        }
    }

    let mut pairs = Vec::new();
    for i in 0..na {
        let (j, s) = best_for_a[i];
        if best_for_b[j].0 == i && s as f64 >= min_similarity {
            pairs.push(MatchPair {
                index_a: idx_a[i],
                index_b: idx_b[j],
                similarity: s as f64,
            });
        }
    }
    pairs
}

/// One-way transfer error: Euclidean distance between the first point
/// projected through `h` and its claimed correspondence.
pub fn transfer_error(
    h: &Homography,
    point_a: Point2,
    point_b: Point2,
) -> Result<f64, GeometryError> {
    Ok(h.apply(point_a)?.distance(&point_b))
}

/// Full enhancement pipeline: mask-filter both sets, associate
/// descriptors mutually, then verify with homography RANSAC. Pair indices
/// in the report refer to the *input* feature sets.
pub fn enhance_matches(
    a: &FeatureSet,
    b: &FeatureSet,
    config: &MatchConfig,
    seed: u64,
) -> Result<MatchReport, MatchError> {
    config.assert_valid();
    let kept_a = mask_filter_indices(&a.features, config.mask_radius);
    let kept_b = mask_filter_indices(&b.features, config.mask_radius);
    let pairs = match_descriptors_indexed(a, &kept_a, b, &kept_b, config.min_similarity);

    let correspondences: Vec<Correspondence> = pairs
        .iter()
        .map(|p| {
            let (mut pa, mut pb) = (
                a.features[p.index_a].location,
                b.features[p.index_b].location,
            );
            if let Some(k) = &config.intrinsics {
                pa = k.to_normalized(pa);
                pb = k.to_normalized(pb);
            }
            Correspondence {
                index_a: p.index_a,
                index_b: p.index_b,
                point_a: pa,
                point_b: pb,
                similarity: p.similarity,
            }
        })
        .collect();

    ransac_homography(&correspondences, config, seed)
}
