//! Rigid-body and projective primitives shared by the other modules:
//! planar points, homographies with a fixed `h9 = 1` scale, timestamped
//! SE(3) poses with log/exp maps, and trajectories.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3, Vector6};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    /// The projective denominator `h7*u + h8*v + h9` vanished.
    #[error("degenerate projection: |denominator| = {0:.3e} < 1e-12")]
    DegenerateProjection(f64),
    /// Homography determinant too small to invert.
    #[error("homography is not invertible: |det| = {0:.3e}")]
    NonInvertible(f64),
    /// The `h9` entry is too small relative to the matrix scale to impose
    /// `h9 = 1`; rescale (e.g. by the Frobenius norm) before normalizing.
    #[error("cannot normalize homography: |h9| = {0:.3e} < 1e-12")]
    UnnormalizableScale(f64),
    /// Trajectory timestamps must be strictly increasing.
    #[error("timestamps not strictly increasing at index {index}")]
    NonMonotonicTimestamps { index: usize },
}

/// Coordinate frame a planar point lives in. Pixel coordinates come
/// straight off the detector; normalized coordinates have had the camera
/// intrinsics removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointUnit {
    Pixel,
    Normalized,
}

/// A 2-D point tagged with its coordinate unit. Operations that mix two
/// points assert the units agree; mixing frames is a caller bug.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub u: f64,
    pub v: f64,
    pub unit: PointUnit,
}

impl Point2 {
    pub fn pixel(u: f64, v: f64) -> Self {
        Self::new(u, v, PointUnit::Pixel)
    }

    pub fn normalized(u: f64, v: f64) -> Self {
        Self::new(u, v, PointUnit::Normalized)
    }

    pub fn new(u: f64, v: f64, unit: PointUnit) -> Self {
        assert!(
            u.is_finite() && v.is_finite(),
            "point coordinates must be finite, got ({u}, {v})"
        );
        Self { u, v, unit }
    }

    /// Euclidean distance. Panics if the two points use different units.
    pub fn distance(&self, other: &Point2) -> f64 {
        assert_eq!(self.unit, other.unit, "mixing point units");
        ((self.u - other.u).powi(2) + (self.v - other.v).powi(2)).sqrt()
    }
}

/// Pinhole camera intrinsics used to move between pixel and
/// normalized-plane coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Self {
        assert!(fx != 0.0 && fy != 0.0, "focal lengths must be nonzero");
        Self { fx, fy, cx, cy }
    }

    pub fn to_normalized(&self, p: Point2) -> Point2 {
        assert_eq!(p.unit, PointUnit::Pixel);
        Point2::normalized((p.u - self.cx) / self.fx, (p.v - self.cy) / self.fy)
    }

    pub fn to_pixel(&self, p: Point2) -> Point2 {
        assert_eq!(p.unit, PointUnit::Normalized);
        Point2::pixel(self.fx * p.u + self.cx, self.fy * p.v + self.cy)
    }
}

const SCALE_EPS: f64 = 1e-12;

/// 3x3 projective map between two views of a plane, stored row-major and
/// dehomogenized so the last entry is exactly 1. The map has 8 degrees of
/// freedom; any global scaling of the coefficients is the same map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    h: [f64; 9],
}

impl Homography {
    pub fn identity() -> Self {
        Self {
            h: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        }
    }

    /// Build from row-major coefficients, imposing `h9 = 1`. Fails when
    /// `h9` is (relatively) too small for the dehomogenized form to exist;
    /// rescaling by the Frobenius norm first is the caller's fallback.
    pub fn from_coeffs(h: [f64; 9]) -> Result<Self, GeometryError> {
        let frob = h.iter().map(|x| x * x).sum::<f64>().sqrt();
        if frob == 0.0 || !frob.is_finite() {
            return Err(GeometryError::UnnormalizableScale(h[8].abs()));
        }
        // Judge |h9| against the overall coefficient scale so the check is
        // invariant to the arbitrary input scaling.
        if h[8].abs() / frob < SCALE_EPS {
            return Err(GeometryError::UnnormalizableScale(h[8].abs()));
        }
        let mut out = [0.0; 9];
        for (o, v) in out.iter_mut().zip(h.iter()) {
            *o = v / h[8];
        }
        out[8] = 1.0;
        let result = Self { h: out };
        let det = result.determinant();
        if !det.is_finite() || det.abs() <= SCALE_EPS {
            return Err(GeometryError::NonInvertible(det.abs()));
        }
        Ok(result)
    }

    pub fn from_matrix(m: &Matrix3<f64>) -> Result<Self, GeometryError> {
        Self::from_coeffs([
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ])
    }

    /// Row-major coefficients `h1..h9` with `h9 = 1`.
    pub fn coeffs(&self) -> &[f64; 9] {
        &self.h
    }

    pub fn as_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.h[0], self.h[1], self.h[2], self.h[3], self.h[4], self.h[5], self.h[6], self.h[7],
            self.h[8],
        )
    }

    pub fn determinant(&self) -> f64 {
        self.as_matrix().determinant()
    }

    pub fn inverse(&self) -> Result<Homography, GeometryError> {
        let det = self.determinant();
        if det.abs() < SCALE_EPS {
            return Err(GeometryError::NonInvertible(det.abs()));
        }
        let inv = self
            .as_matrix()
            .try_inverse()
            .ok_or(GeometryError::NonInvertible(det.abs()))?;
        Homography::from_matrix(&inv)
    }

    /// Map a point through the homography and dehomogenize:
    /// `u' = (h1 u + h2 v + h3) / (h7 u + h8 v + h9)` and likewise for `v'`.
    pub fn apply(&self, p: Point2) -> Result<Point2, GeometryError> {
        let den = self.h[6] * p.u + self.h[7] * p.v + self.h[8];
        if den.abs() < SCALE_EPS {
            return Err(GeometryError::DegenerateProjection(den.abs()));
        }
        let u = (self.h[0] * p.u + self.h[1] * p.v + self.h[2]) / den;
        let v = (self.h[3] * p.u + self.h[4] * p.v + self.h[5]) / den;
        Ok(Point2::new(u, v, p.unit))
    }
}

/// Map a point through a homography. Free-function form of
/// [`Homography::apply`].
pub fn apply_homography(h: &Homography, p: Point2) -> Result<Point2, GeometryError> {
    h.apply(p)
}

/// A timestamped rigid-body pose. The quaternion is kept unit-norm with
/// `w >= 0`, which removes the double-cover ambiguity and makes poses
/// directly comparable in tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSE3 {
    pub timestamp: f64,
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

fn canonicalize(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    if q.w < 0.0 {
        UnitQuaternion::new_unchecked(Quaternion::new(-q.w, -q.i, -q.j, -q.k))
    } else {
        q
    }
}

impl PoseSE3 {
    pub fn new(timestamp: f64, rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            timestamp,
            rotation: canonicalize(rotation),
            translation,
        }
    }

    /// Construct from raw quaternion components and a translation vector.
    /// Components already unit-norm (within the 1e-9 invariant) are kept
    /// bit-exact so that parsed files reproduce stored poses; anything
    /// further off is renormalized.
    pub fn from_parts(
        timestamp: f64,
        qw: f64,
        qx: f64,
        qy: f64,
        qz: f64,
        t: Vector3<f64>,
    ) -> Self {
        let raw = Quaternion::new(qw, qx, qy, qz);
        let norm = raw.norm();
        let q = if (norm - 1.0).abs() <= 1e-9 {
            UnitQuaternion::new_unchecked(raw)
        } else {
            UnitQuaternion::from_quaternion(raw)
        };
        Self::new(timestamp, q, t)
    }

    pub fn identity(timestamp: f64) -> Self {
        Self::new(timestamp, UnitQuaternion::identity(), Vector3::zeros())
    }

    /// Group composition `self * other`. The result keeps `self`'s
    /// timestamp; relative transforms carry no meaningful stamp of their
    /// own.
    pub fn compose(&self, other: &PoseSE3) -> PoseSE3 {
        PoseSE3::new(
            self.timestamp,
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> PoseSE3 {
        let inv_rot = self.rotation.inverse();
        PoseSE3::new(
            self.timestamp,
            inv_rot,
            -(inv_rot * self.translation),
        )
    }

    /// Rotation angle in `[0, pi]`.
    pub fn rotation_angle(&self) -> f64 {
        let q = canonicalize(self.rotation);
        let vec_norm = (q.i * q.i + q.j * q.j + q.k * q.k).sqrt();
        2.0 * vec_norm.atan2(q.w)
    }

    pub fn translation_norm(&self) -> f64 {
        self.translation.norm()
    }

    /// SE(3) logarithm as `[rho, phi]`: translation part first, rotation
    /// (axis-angle) part last. Defined away from rotation angle pi.
    pub fn log(&self) -> Vector6<f64> {
        let phi = self.rotation_log();
        let v_inv = left_jacobian_inverse(&phi);
        let rho = v_inv * self.translation;
        Vector6::new(rho.x, rho.y, rho.z, phi.x, phi.y, phi.z)
    }

    /// SE(3) exponential; inverse of [`PoseSE3::log`]. The result carries
    /// timestamp 0; set one afterwards if needed.
    pub fn exp(xi: &Vector6<f64>) -> PoseSE3 {
        let rho = Vector3::new(xi[0], xi[1], xi[2]);
        let phi = Vector3::new(xi[3], xi[4], xi[5]);
        let rotation = rotation_exp(&phi);
        let translation = left_jacobian(&phi) * rho;
        PoseSE3::new(0.0, rotation, translation)
    }

    fn rotation_log(&self) -> Vector3<f64> {
        let q = canonicalize(self.rotation);
        let vec = Vector3::new(q.i, q.j, q.k);
        let vec_norm = vec.norm();
        let angle = 2.0 * vec_norm.atan2(q.w);
        if vec_norm < 1e-12 {
            // sin(theta/2) ~ theta/2, so axis*angle ~ 2*vec.
            vec * 2.0
        } else {
            vec * (angle / vec_norm)
        }
    }

    /// Same rigid transform with a different timestamp.
    pub fn at_time(&self, timestamp: f64) -> PoseSE3 {
        PoseSE3 { timestamp, ..*self }
    }
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

fn rotation_exp(phi: &Vector3<f64>) -> UnitQuaternion<f64> {
    let theta = phi.norm();
    let half = theta * 0.5;
    // sin(theta/2)/theta, with the series value 1/2 - theta^2/48 near zero.
    let k = if theta < 1e-8 {
        0.5 - theta * theta / 48.0
    } else {
        half.sin() / theta
    };
    let q = Quaternion::new(half.cos(), phi.x * k, phi.y * k, phi.z * k);
    canonicalize(UnitQuaternion::from_quaternion(q))
}

/// SO(3) left Jacobian: V = I + a*[phi]x + b*[phi]x^2 with
/// a = (1-cos t)/t^2, b = (t-sin t)/t^3.
fn left_jacobian(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = phi.norm_squared();
    let theta = theta2.sqrt();
    // The closed forms cancel catastrophically for small theta; switch to
    // the series well before that bites.
    let (a, b) = if theta < 1e-2 {
        (
            0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0,
            1.0 / 6.0 - theta2 / 120.0 + theta2 * theta2 / 5040.0,
        )
    } else {
        (
            (1.0 - theta.cos()) / theta2,
            (theta - theta.sin()) / (theta2 * theta),
        )
    };
    let s = skew(phi);
    Matrix3::identity() + s * a + s * s * b
}

/// Closed-form inverse of the SO(3) left Jacobian.
fn left_jacobian_inverse(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = phi.norm_squared();
    let theta = theta2.sqrt();
    let c = if theta < 1e-2 {
        1.0 / 12.0 + theta2 / 720.0 + theta2 * theta2 / 30_240.0
    } else {
        (1.0 - theta * theta.sin() / (2.0 * (1.0 - theta.cos()))) / theta2
    };
    let s = skew(phi);
    Matrix3::identity() - s * 0.5 + s * s * c
}

/// An ordered sequence of poses with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    poses: Vec<PoseSE3>,
}

impl Trajectory {
    pub fn new(poses: Vec<PoseSE3>) -> Result<Self, GeometryError> {
        for (i, pair) in poses.windows(2).enumerate() {
            if pair[1].timestamp <= pair[0].timestamp {
                return Err(GeometryError::NonMonotonicTimestamps { index: i + 1 });
            }
        }
        Ok(Self { poses })
    }

    pub fn empty() -> Self {
        Self { poses: Vec::new() }
    }

    pub fn push(&mut self, pose: PoseSE3) -> Result<(), GeometryError> {
        if let Some(last) = self.poses.last() {
            if pose.timestamp <= last.timestamp {
                return Err(GeometryError::NonMonotonicTimestamps {
                    index: self.poses.len(),
                });
            }
        }
        self.poses.push(pose);
        Ok(())
    }

    pub fn poses(&self) -> &[PoseSE3] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PoseSE3> {
        self.poses.iter()
    }

    pub fn timestamps(&self) -> impl Iterator<Item = f64> + '_ {
        self.poses.iter().map(|p| p.timestamp)
    }
}

impl std::ops::Index<usize> for Trajectory {
    type Output = PoseSE3;
    fn index(&self, i: usize) -> &PoseSE3 {
        &self.poses[i]
    }
}
