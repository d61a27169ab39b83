//! Trajectory accuracy metrics: timestamp association against a
//! reference, closed-form rigid/similarity alignment, absolute trajectory
//! error (ATE), relative pose error (RPE), improvement percentages, and
//! error-distribution statistics.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use thiserror::Error;

use crate::geometry::{PoseSE3, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("no timestamp pairs within {max_diff} s between the trajectories")]
    NoOverlap { max_diff: f64 },
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("need at least {needed} associated poses, got {got}")]
    InsufficientLength { needed: usize, got: usize },
    #[error("baseline must be positive, got {0} (0 conventionally marks a failed run)")]
    NonPositiveBaseline(f64),
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
}

/// Greedy nearest-timestamp association: candidate pairs are taken in
/// order of ascending time difference, each index used at most once.
/// Returns `(est index, ref index)` pairs sorted by the estimate index.
pub fn associate(
    est: &Trajectory,
    reference: &Trajectory,
    max_diff: f64,
) -> Result<Vec<(usize, usize)>, EvalError> {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, a) in est.iter().enumerate() {
        for (j, b) in reference.iter().enumerate() {
            let dt = (a.timestamp - b.timestamp).abs();
            if dt <= max_diff {
                candidates.push((dt, i, j));
            }
        }
    }
    candidates.sort_by(|x, y| x.partial_cmp(y).expect("finite timestamps"));

    let mut used_est = vec![false; est.len()];
    let mut used_ref = vec![false; reference.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in candidates {
        if !used_est[i] && !used_ref[j] {
            used_est[i] = true;
            used_ref[j] = true;
            pairs.push((i, j));
        }
    }
    if pairs.is_empty() {
        return Err(EvalError::NoOverlap { max_diff });
    }
    pairs.sort_unstable();
    Ok(pairs)
}

/// A rigid (or similarity) transform `p -> scale * R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alignment {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
    pub scale: f64,
}

impl Alignment {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
            scale: 1.0,
        }
    }

    pub fn apply_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * p) + self.translation
    }

    /// Transform a full pose (rotation composed, translation mapped).
    pub fn apply_pose(&self, pose: &PoseSE3) -> PoseSE3 {
        PoseSE3::new(
            pose.timestamp,
            self.rotation * pose.rotation,
            self.apply_point(&pose.translation),
        )
    }
}

/// Closed-form least-squares alignment of `est` onto `reference`
/// (Umeyama): minimizes `sum |ref_i - (s R est_i + t)|^2`. With
/// `with_scale = false` the scale is fixed to 1.
pub fn umeyama_align(
    est: &[Vector3<f64>],
    reference: &[Vector3<f64>],
    with_scale: bool,
) -> Result<Alignment, EvalError> {
    assert_eq!(est.len(), reference.len(), "point sets must pair up");
    if est.len() < 3 {
        return Err(EvalError::InsufficientLength {
            needed: 3,
            got: est.len(),
        });
    }
    let n = est.len() as f64;
    let mean_est: Vector3<f64> = est.iter().sum::<Vector3<f64>>() / n;
    let mean_ref: Vector3<f64> = reference.iter().sum::<Vector3<f64>>() / n;

    let mut covariance = Matrix3::<f64>::zeros();
    let mut var_est = 0.0;
    for (e, r) in est.iter().zip(reference.iter()) {
        let de = e - mean_est;
        let dr = r - mean_ref;
        covariance += dr * de.transpose();
        var_est += de.norm_squared();
    }
    covariance /= n;
    var_est /= n;

    let svd = covariance.svd(true, true);
    let u = svd.u.expect("svd of a 3x3 requested with vectors");
    let v_t = svd.v_t.expect("svd of a 3x3 requested with vectors");
    let d = svd.singular_values;
    // Rotation is ambiguous when the points are (near) collinear: the two
    // smaller singular values vanish.
    if d[1] <= 1e-12 * d[0].max(1.0) {
        return Err(EvalError::DegenerateGeometry(
            "point sets are collinear; rotation is not determined".into(),
        ));
    }
    let mut s = Vector3::new(1.0, 1.0, 1.0);
    if (u.determinant() * v_t.determinant()) < 0.0 {
        s[2] = -1.0;
    }
    let rotation_matrix = u * Matrix3::from_diagonal(&s) * v_t;
    let rotation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(
        rotation_matrix,
    ));
    let scale = if with_scale {
        if var_est <= 0.0 {
            return Err(EvalError::DegenerateGeometry(
                "estimated points coincide; scale is not determined".into(),
            ));
        }
        d.dot(&s) / var_est
    } else {
        1.0
    };
    let translation = mean_ref - scale * (rotation * mean_est);
    Ok(Alignment {
        rotation,
        translation,
        scale,
    })
}

/// Absolute-trajectory-error statistics over the associated poses.
#[derive(Debug, Clone, PartialEq)]
pub struct AteResult {
    pub rmse: f64,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    /// `(timestamp, translational error)` per associated pose.
    pub errors: Vec<(f64, f64)>,
    pub alignment: Alignment,
}

/// How the estimate is aligned to the reference before measuring ATE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlignMode {
    /// Closed-form SE(3) alignment (the default; scale is observable for
    /// the monocular+IMU trajectories this evaluates).
    #[default]
    Se3,
    /// Similarity alignment including scale.
    Sim3,
    /// Compare in the given frames.
    None,
}

/// ATE: per-pose translational error `|trans(ref_i^-1 * S(est_i))|` after
/// optionally aligning the estimate onto the reference.
pub fn ate(
    est: &Trajectory,
    reference: &Trajectory,
    align: AlignMode,
    max_diff: f64,
) -> Result<AteResult, EvalError> {
    let pairs = associate(est, reference, max_diff)?;
    let alignment = match align {
        AlignMode::None => Alignment::identity(),
        AlignMode::Se3 | AlignMode::Sim3 => {
            if pairs.len() < 3 {
                return Err(EvalError::InsufficientLength {
                    needed: 3,
                    got: pairs.len(),
                });
            }
            let est_points: Vec<Vector3<f64>> =
                pairs.iter().map(|&(i, _)| est[i].translation).collect();
            let ref_points: Vec<Vector3<f64>> = pairs
                .iter()
                .map(|&(_, j)| reference[j].translation)
                .collect();
            umeyama_align(&est_points, &ref_points, align == AlignMode::Sim3)?
        }
    };

    let mut errors = Vec::with_capacity(pairs.len());
    for &(i, j) in &pairs {
        let aligned = alignment.apply_pose(&est[i]);
        let residual = reference[j].inverse().compose(&aligned);
        errors.push((reference[j].timestamp, residual.translation_norm()));
    }
    let stats = series_stats(errors.iter().map(|&(_, e)| e));
    Ok(AteResult {
        rmse: stats.rmse,
        mean: stats.mean,
        median: stats.median,
        min: stats.min,
        max: stats.max,
        errors,
        alignment,
    })
}

/// Relative-pose-error statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct RpeResult {
    /// RMSE of the translational magnitude of the residual motion, meters.
    pub translation_rmse: f64,
    /// RMSE of the rotation angle of the residual motion, radians.
    pub rotation_rmse: f64,
    /// Step used, in associated frames.
    pub delta: usize,
    /// `(timestamp, translation error, rotation error)` per step.
    pub errors: Vec<(f64, f64, f64)>,
}

impl RpeResult {
    pub fn rotation_rmse_degrees(&self) -> f64 {
        self.rotation_rmse.to_degrees()
    }
}

/// RPE over a fixed step of `delta` associated frames:
/// `E_i = (ref_i^-1 ref_{i+d})^-1 (est_i^-1 est_{i+d})`.
pub fn rpe(
    est: &Trajectory,
    reference: &Trajectory,
    delta: usize,
    max_diff: f64,
) -> Result<RpeResult, EvalError> {
    assert!(delta >= 1, "rpe delta must be at least 1 frame");
    let pairs = associate(est, reference, max_diff)?;
    if pairs.len() < delta + 1 {
        return Err(EvalError::InsufficientLength {
            needed: delta + 1,
            got: pairs.len(),
        });
    }
    let mut errors = Vec::with_capacity(pairs.len() - delta);
    for w in 0..(pairs.len() - delta) {
        let (i0, j0) = pairs[w];
        let (i1, j1) = pairs[w + delta];
        let ref_motion = reference[j0].inverse().compose(&reference[j1]);
        let est_motion = est[i0].inverse().compose(&est[i1]);
        let residual = ref_motion.inverse().compose(&est_motion);
        errors.push((
            reference[j0].timestamp,
            residual.translation_norm(),
            residual.rotation_angle(),
        ));
    }
    let t = series_stats(errors.iter().map(|&(_, e, _)| e));
    let r = series_stats(errors.iter().map(|&(_, _, e)| e));
    Ok(RpeResult {
        translation_rmse: t.rmse,
        rotation_rmse: r.rmse,
        delta,
        errors,
    })
}

/// Percentage improvement of `improved` over `baseline`:
/// `100 * (baseline - improved) / baseline`. A baseline of 0 is rejected:
/// by convention a reported 0.0 marks a failed run, which is not a valid
/// comparison point.
pub fn improvement_report(baseline: f64, improved: f64) -> Result<f64, EvalError> {
    if baseline.is_nan() || baseline <= 0.0 {
        return Err(EvalError::NonPositiveBaseline(baseline));
    }
    Ok(100.0 * (baseline - improved) / baseline)
}

/// Histogram plus maximum-likelihood Gaussian fit of an error series.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorDistribution {
    pub mean: f64,
    /// Population (maximum-likelihood) standard deviation.
    pub sigma: f64,
    /// `(bin lower edge, bin upper edge, count)`.
    pub bins: Vec<(f64, f64, u64)>,
}

/// Fit a Gaussian and histogram the series. At least 10 samples required.
pub fn error_distribution(series: &[f64], bin_count: usize) -> Result<ErrorDistribution, EvalError> {
    if series.len() < 10 {
        return Err(EvalError::InsufficientSamples {
            needed: 10,
            got: series.len(),
        });
    }
    assert!(bin_count >= 1, "need at least one histogram bin");
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let sigma = (series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();

    let lo = series.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = series.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // A constant series still gets one well-formed bin.
    let (lo, hi) = if (hi - lo).abs() < f64::EPSILON {
        (lo - 0.5, lo + 0.5)
    } else {
        (lo, hi)
    };
    let width = (hi - lo) / bin_count as f64;
    let mut counts = vec![0u64; bin_count];
    for &x in series {
        let idx = (((x - lo) / width) as usize).min(bin_count - 1);
        counts[idx] += 1;
    }
    let bins = counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (lo + i as f64 * width, lo + (i + 1) as f64 * width, c))
        .collect();
    Ok(ErrorDistribution { mean, sigma, bins })
}

struct SeriesStats {
    rmse: f64,
    mean: f64,
    median: f64,
    min: f64,
    max: f64,
}

fn series_stats(values: impl Iterator<Item = f64>) -> SeriesStats {
    let mut v: Vec<f64> = values.collect();
    assert!(!v.is_empty(), "statistics need at least one value");
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite errors"));
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    let rmse = (v.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
    let median = if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    };
    SeriesStats {
        rmse,
        mean,
        median,
        min: v[0],
        max: v[n - 1],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn line_trajectory(n: usize, dt: f64) -> Trajectory {
        let poses = (0..n)
            .map(|i| {
                PoseSE3::new(
                    i as f64 * dt,
                    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 0.05 * i as f64),
                    Vector3::new(i as f64 * 0.2, (i as f64 * 0.1).sin(), 0.0),
                )
            })
            .collect();
        Trajectory::new(poses).unwrap()
    }

    fn random_rigid(rng: &mut SplitMix64) -> Alignment {
        let axis = Vector3::new(rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian());
        Alignment {
            rotation: UnitQuaternion::from_axis_angle(
                &nalgebra::Unit::new_normalize(axis),
                rng.next_range(0.0, 3.0),
            ),
            translation: Vector3::new(
                rng.next_range(-5.0, 5.0),
                rng.next_range(-5.0, 5.0),
                rng.next_range(-5.0, 5.0),
            ),
            scale: 1.0,
        }
    }

    #[test]
    fn identical_timestamps_pair_one_to_one() {
        let t = line_trajectory(20, 0.1);
        let pairs = associate(&t, &t, 0.02).unwrap();
        assert_eq!(pairs, (0..20).map(|i| (i, i)).collect::<Vec<_>>());
    }

    #[test]
    fn shifted_timestamps_do_not_overlap() {
        let a = line_trajectory(10, 0.1);
        let shifted: Vec<PoseSE3> = a.iter().map(|p| p.at_time(p.timestamp + 1000.0)).collect();
        let b = Trajectory::new(shifted).unwrap();
        assert_eq!(
            associate(&b, &a, 0.02).unwrap_err(),
            EvalError::NoOverlap { max_diff: 0.02 }
        );
    }

    #[test]
    fn jittered_timestamps_match_brute_force_assignment() {
        let mut rng = SplitMix64::new(3);
        let base = line_trajectory(50, 0.1);
        let jittered: Vec<PoseSE3> = base
            .iter()
            .map(|p| p.at_time(p.timestamp + rng.next_range(-0.005, 0.005)))
            .collect();
        let est = Trajectory::new(jittered).unwrap();
        let got = associate(&est, &base, 0.02).unwrap();

        // Brute-force greedy oracle over the full pair list.
        let mut all: Vec<(f64, usize, usize)> = Vec::new();
        for i in 0..est.len() {
            for j in 0..base.len() {
                let dt = (est[i].timestamp - base[j].timestamp).abs();
                if dt <= 0.02 {
                    all.push((dt, i, j));
                }
            }
        }
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let (mut ue, mut ur) = (vec![false; est.len()], vec![false; base.len()]);
        let mut want: Vec<(usize, usize)> = Vec::new();
        for (_, i, j) in all {
            if !ue[i] && !ur[j] {
                ue[i] = true;
                ur[j] = true;
                want.push((i, j));
            }
        }
        want.sort_unstable();
        assert_eq!(got, want);
    }

    #[test]
    fn umeyama_identity_for_identical_sets() {
        let pts: Vec<Vector3<f64>> = (0..10)
            .map(|i| Vector3::new(i as f64, (i * i) as f64 * 0.1, -(i as f64) * 0.3))
            .collect();
        let a = umeyama_align(&pts, &pts, false).unwrap();
        assert!(a.rotation.angle() < 1e-9);
        assert!(a.translation.norm() < 1e-9);
        assert_eq!(a.scale, 1.0);
    }

    #[test]
    fn umeyama_recovers_planted_rigid_transform() {
        let mut rng = SplitMix64::new(9);
        for _ in 0..50 {
            let truth = random_rigid(&mut rng);
            let est: Vec<Vector3<f64>> = (0..20)
                .map(|_| {
                    Vector3::new(
                        rng.next_range(-10.0, 10.0),
                        rng.next_range(-10.0, 10.0),
                        rng.next_range(-10.0, 10.0),
                    )
                })
                .collect();
            let reference: Vec<Vector3<f64>> = est.iter().map(|p| truth.apply_point(p)).collect();
            let got = umeyama_align(&est, &reference, false).unwrap();
            assert!(got.rotation.angle_to(&truth.rotation) < 1e-9);
            assert!((got.translation - truth.translation).norm() < 1e-9);
        }
    }

    #[test]
    fn umeyama_pure_scale() {
        let pts: Vec<Vector3<f64>> = (0..12)
            .map(|i| Vector3::new((i % 3) as f64, (i / 3) as f64, (i % 4) as f64))
            .collect();
        let doubled: Vec<Vector3<f64>> = pts.iter().map(|p| 2.0 * p).collect();
        let a = umeyama_align(&pts, &doubled, true).unwrap();
        assert!((a.scale - 2.0).abs() < 1e-9);
        assert!(a.rotation.angle() < 1e-9);
    }

    #[test]
    fn umeyama_rejects_collinear_points() {
        let pts: Vec<Vector3<f64>> = (0..8).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect();
        assert!(matches!(
            umeyama_align(&pts, &pts, false),
            Err(EvalError::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn ate_of_identical_trajectories_is_zero() {
        let t = line_trajectory(30, 0.05);
        let r = ate(&t, &t, AlignMode::None, 0.02).unwrap();
        assert_eq!(r.rmse, 0.0);
        assert_eq!(r.mean, 0.0);
        assert_eq!(r.median, 0.0);
        assert_eq!(r.max, 0.0);
    }

    #[test]
    fn constant_offset_without_alignment_is_the_offset() {
        let t = line_trajectory(25, 0.05);
        let moved: Vec<PoseSE3> = t
            .iter()
            .map(|p| PoseSE3::new(p.timestamp, p.rotation, p.translation + Vector3::new(0.3, 0.0, 0.0)))
            .collect();
        let est = Trajectory::new(moved).unwrap();
        let r = ate(&est, &t, AlignMode::None, 0.02).unwrap();
        assert!((r.rmse - 0.3).abs() < 1e-12);
        assert!((r.min - 0.3).abs() < 1e-12 && (r.max - 0.3).abs() < 1e-12);
    }

    #[test]
    fn ate_matches_direct_formula_oracle() {
        let mut rng = SplitMix64::new(17);
        let t = line_trajectory(40, 0.05);
        let noisy: Vec<PoseSE3> = t
            .iter()
            .map(|p| {
                PoseSE3::new(
                    p.timestamp,
                    p.rotation,
                    p.translation
                        + Vector3::new(
                            rng.next_gaussian() * 0.1,
                            rng.next_gaussian() * 0.1,
                            rng.next_gaussian() * 0.1,
                        ),
                )
            })
            .collect();
        let est = Trajectory::new(noisy).unwrap();
        let r = ate(&est, &t, AlignMode::None, 0.02).unwrap();
        // Independent route: plain Euclidean distances, direct rmse sum.
        let direct: Vec<f64> = est
            .iter()
            .zip(t.iter())
            .map(|(a, b)| (a.translation - b.translation).norm())
            .collect();
        let rmse = (direct.iter().map(|e| e * e).sum::<f64>() / direct.len() as f64).sqrt();
        assert!((r.rmse - rmse).abs() < 1e-12);
    }

    #[test]
    fn aligned_ate_is_invariant_to_rigid_pretransforms() {
        let mut rng = SplitMix64::new(23);
        let t = line_trajectory(40, 0.05);
        let noisy: Vec<PoseSE3> = t
            .iter()
            .map(|p| {
                PoseSE3::new(
                    p.timestamp,
                    p.rotation,
                    p.translation + Vector3::new(rng.next_gaussian() * 0.05, 0.0, 0.0),
                )
            })
            .collect();
        let est = Trajectory::new(noisy).unwrap();
        let base = ate(&est, &t, AlignMode::Se3, 0.02).unwrap();
        for _ in 0..10 {
            let g = random_rigid(&mut rng);
            let moved: Vec<PoseSE3> = est.iter().map(|p| g.apply_pose(p)).collect();
            let moved = Trajectory::new(moved).unwrap();
            let r = ate(&moved, &t, AlignMode::Se3, 0.02).unwrap();
            assert!((r.rmse - base.rmse).abs() < 1e-9, "{} vs {}", r.rmse, base.rmse);
        }
    }

    #[test]
    fn rpe_of_identical_trajectories_is_zero() {
        let t = line_trajectory(30, 0.05);
        let r = rpe(&t, &t, 1, 0.02).unwrap();
        assert_eq!(r.translation_rmse, 0.0);
        assert_eq!(r.rotation_rmse, 0.0);
    }

    #[test]
    fn rpe_ignores_global_offsets() {
        let t = line_trajectory(30, 0.05);
        let mut rng = SplitMix64::new(31);
        let g = random_rigid(&mut rng);
        let moved: Vec<PoseSE3> = t.iter().map(|p| g.apply_pose(p)).collect();
        let est = Trajectory::new(moved).unwrap();
        let r = rpe(&est, &t, 1, 0.02).unwrap();
        assert!(r.translation_rmse < 1e-12);
        assert!(r.rotation_rmse < 1e-12);
    }

    #[test]
    fn rpe_matches_direct_formula_oracle() {
        let mut rng = SplitMix64::new(37);
        let t = line_trajectory(25, 0.05);
        let noisy: Vec<PoseSE3> = t
            .iter()
            .map(|p| {
                PoseSE3::new(
                    p.timestamp,
                    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), rng.next_gaussian() * 0.02)
                        * p.rotation,
                    p.translation + Vector3::new(rng.next_gaussian() * 0.05, 0.0, 0.0),
                )
            })
            .collect();
        let est = Trajectory::new(noisy).unwrap();
        let r = rpe(&est, &t, 2, 0.02).unwrap();

        let mut tr = Vec::new();
        let mut rot = Vec::new();
        for i in 0..(25 - 2) {
            let dr = t[i].inverse().compose(&t[i + 2]);
            let de = est[i].inverse().compose(&est[i + 2]);
            let e = dr.inverse().compose(&de);
            tr.push(e.translation_norm());
            rot.push(e.rotation_angle());
        }
        let trmse = (tr.iter().map(|x| x * x).sum::<f64>() / tr.len() as f64).sqrt();
        let rrmse = (rot.iter().map(|x| x * x).sum::<f64>() / rot.len() as f64).sqrt();
        assert!((r.translation_rmse - trmse).abs() < 1e-12);
        assert!((r.rotation_rmse - rrmse).abs() < 1e-12);
    }

    #[test]
    fn rpe_needs_enough_poses() {
        let t = line_trajectory(5, 0.05);
        assert!(matches!(
            rpe(&t, &t, 10, 0.02),
            Err(EvalError::InsufficientLength { needed: 11, got: 5 })
        ));
    }

    #[test]
    fn improvement_percentages_match_reported_rows() {
        // Frozen comparison points with their published rounding.
        let mh05 = improvement_report(0.262125, 0.158304).unwrap();
        assert!((mh05 - 39.6).abs() < 0.05, "{mh05}");
        let v203 = improvement_report(0.192608, 0.168746).unwrap();
        assert!((v203 - 12.4).abs() < 0.15, "{v203}");
        assert_eq!(improvement_report(1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn zero_baseline_marks_failed_run() {
        assert!(matches!(
            improvement_report(0.0, 0.1),
            Err(EvalError::NonPositiveBaseline(_))
        ));
    }

    #[test]
    fn constant_series_has_zero_sigma() {
        let d = error_distribution(&[0.25; 64], 50).unwrap();
        assert_eq!(d.sigma, 0.0);
        assert_eq!(d.mean, 0.25);
        let total: u64 = d.bins.iter().map(|&(_, _, c)| c).sum();
        assert_eq!(total, 64);
    }

    #[test]
    fn gaussian_fit_recovers_parameters() {
        let mut rng = SplitMix64::new(41);
        let series: Vec<f64> = (0..100_000)
            .map(|_| 0.1 + 0.02 * rng.next_gaussian())
            .collect();
        let d = error_distribution(&series, 50).unwrap();
        assert!((d.mean - 0.1).abs() / 0.1 < 0.01);
        assert!((d.sigma - 0.02).abs() / 0.02 < 0.01);
    }

    #[test]
    fn narrower_series_fits_smaller_sigma() {
        let mut rng = SplitMix64::new(43);
        let wide: Vec<f64> = (0..5000).map(|_| 0.2 + 0.05 * rng.next_gaussian()).collect();
        let narrow: Vec<f64> = (0..5000).map(|_| 0.1 + 0.01 * rng.next_gaussian()).collect();
        let dw = error_distribution(&wide, 50).unwrap();
        let dn = error_distribution(&narrow, 50).unwrap();
        assert!(dn.sigma < dw.sigma);
        assert!(dn.mean < dw.mean);
    }

    #[test]
    fn too_few_samples_is_an_error() {
        assert!(matches!(
            error_distribution(&[1.0; 9], 10),
            Err(EvalError::InsufficientSamples { needed: 10, got: 9 })
        ));
    }
}
