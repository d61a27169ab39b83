//! Direct linear transform estimation of a homography from point
//! correspondences.
//!
//! Each correspondence `(u1, v1) -> (u2, v2)` contributes two linear
//! constraints, obtained by clearing the projective denominator:
//!
//! ```text
//! h1*u1 + h2*v1 + h3 - u2*(h7*u1 + h8*v1 + h9) = 0
//! h4*u1 + h5*v1 + h6 - v2*(h7*u1 + h8*v1 + h9) = 0
//! ```
//!
//! With the scale fixed by `h9 = 1` this is an inhomogeneous least-squares
//! problem in the remaining 8 unknowns; 4 correspondences determine it,
//! more overdetermine it. Points are conditioned with Hartley
//! normalization (centroid at the origin, mean distance sqrt(2)) before
//! solving and the result is denormalized afterwards.

use nalgebra::{DMatrix, DVector, Matrix3};

use super::MatchError;
use crate::geometry::{Homography, Point2};

/// Condition-number gate on the normalized design matrix.
const MAX_CONDITION: f64 = 1e12;

struct Normalization {
    transform: Matrix3<f64>,
    points: Vec<(f64, f64)>,
}

fn hartley_normalize(points: &[Point2]) -> Result<Normalization, MatchError> {
    let n = points.len() as f64;
    let (mut cu, mut cv) = (0.0, 0.0);
    for p in points {
        cu += p.u;
        cv += p.v;
    }
    cu /= n;
    cv /= n;
    let mean_dist = points
        .iter()
        .map(|p| ((p.u - cu).powi(2) + (p.v - cv).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    if mean_dist < 1e-12 {
        return Err(MatchError::DegenerateConfiguration(
            "all points coincide; cannot condition the linear system".into(),
        ));
    }
    let scale = std::f64::consts::SQRT_2 / mean_dist;
    let transform = Matrix3::new(scale, 0.0, -scale * cu, 0.0, scale, -scale * cv, 0.0, 0.0, 1.0);
    let points = points
        .iter()
        .map(|p| (scale * (p.u - cu), scale * (p.v - cv)))
        .collect();
    Ok(Normalization { transform, points })
}

/// Least-squares homography from `>= 4` correspondences, with `h9 = 1`.
///
/// Fails with [`MatchError::DegenerateConfiguration`] when the design
/// matrix is rank-deficient or ill-conditioned (for example three of four
/// source points collinear).
pub fn dlt_homography(pairs: &[(Point2, Point2)]) -> Result<Homography, MatchError> {
    if pairs.len() < 4 {
        return Err(MatchError::InsufficientMatches {
            needed: 4,
            got: pairs.len(),
        });
    }
    let source: Vec<Point2> = pairs.iter().map(|p| p.0).collect();
    let target: Vec<Point2> = pairs.iter().map(|p| p.1).collect();
    debug_assert!(
        source
            .iter()
            .zip(target.iter())
            .all(|(a, b)| a.unit == b.unit),
        "mixed point units in correspondences"
    );

    let norm_src = hartley_normalize(&source)?;
    let norm_dst = hartley_normalize(&target)?;

    let n = pairs.len();
    let mut a = DMatrix::<f64>::zeros(2 * n, 8);
    let mut b = DVector::<f64>::zeros(2 * n);
    for i in 0..n {
        let (u1, v1) = norm_src.points[i];
        let (u2, v2) = norm_dst.points[i];
        let r = 2 * i;
        a[(r, 0)] = u1;
        a[(r, 1)] = v1;
        a[(r, 2)] = 1.0;
        a[(r, 6)] = -u1 * u2;
        a[(r, 7)] = -v1 * u2;
        b[r] = u2;
        a[(r + 1, 3)] = u1;
        a[(r + 1, 4)] = v1;
        a[(r + 1, 5)] = 1.0;
        a[(r + 1, 6)] = -u1 * v2;
        a[(r + 1, 7)] = -v1 * v2;
        b[r + 1] = v2;
    }

    let svd = a.svd(true, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let sigma_min = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if sigma_min <= 0.0 || sigma_max / sigma_min > MAX_CONDITION {
        return Err(MatchError::DegenerateConfiguration(format!(
            "design matrix condition {:.3e} exceeds {MAX_CONDITION:.0e}",
            if sigma_min > 0.0 {
                sigma_max / sigma_min
            } else {
                f64::INFINITY
            }
        )));
    }
    let x = svd
        .solve(&b, 0.0)
        .map_err(|e| MatchError::DegenerateConfiguration(e.to_string()))?;

    let h_norm = Matrix3::new(x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7], 1.0);
    let denorm = norm_dst
        .transform
        .try_inverse()
        .expect("normalization transform is invertible by construction")
        * h_norm
        * norm_src.transform;
    Homography::from_matrix(&denorm)
        .map_err(|e| MatchError::DegenerateConfiguration(e.to_string()))
}
