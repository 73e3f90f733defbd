//! Rotation algebra shared by the frames {W}, {E} and {C}.
//!
//! Everything here is a pure function on small fixed-size values. The one
//! non-trivial kernel is [`rodrigues_between`], which builds the rotation
//! carrying a measured force direction onto a desired one.

use std::f64::consts::PI;
use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};

use crate::error::Rot3Error;

pub type Vec3 = Vector3<f64>;

/// Default lower bound on a usable force norm, in pseudo-force units.
pub const DEFAULT_FORCE_EPS: f64 = 1e-8;

/// Beyond this angle two vectors are treated as antiparallel.
pub const ANTIPARALLEL_MARGIN: f64 = 1e-6;

/// Tolerance used when validating orthonormality and the determinant.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

/// A proper rotation (orthonormal, determinant +1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Validates `m` against the orthonormality and handedness invariants.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, Rot3Error> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Rot3Error::NotARotation("non-finite entry".into()));
        }
        let err = (m.transpose() * m - Matrix3::identity()).amax();
        if err > ORTHONORMAL_TOL {
            return Err(Rot3Error::NotARotation(format!(
                "R^T R deviates from identity by {err:e}"
            )));
        }
        let det = m.determinant();
        if (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Rot3Error::NotARotation(format!("determinant {det}")));
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Roll, pitch, yaw such that `rpy_to_matrix(roll, pitch, yaw)` rebuilds `self`.
    pub fn to_rpy(&self) -> [f64; 3] {
        let m = &self.0;
        let pitch = (-m[(2, 0)]).clamp(-1.0, 1.0).asin();
        if m[(2, 0)].abs() < 1.0 - 1e-12 {
            let roll = m[(2, 1)].atan2(m[(2, 2)]);
            let yaw = m[(1, 0)].atan2(m[(0, 0)]);
            [roll, pitch, yaw]
        } else {
            // gimbal lock: only roll - yaw (or roll + yaw) is observable
            let roll = 0.0;
            let yaw = (-m[(0, 1)]).atan2(m[(1, 1)]);
            [roll, pitch, yaw]
        }
    }
}

impl Mul for RotationMatrix {
    type Output = RotationMatrix;

    fn mul(self, rhs: RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for RotationMatrix {
    type Output = Vec3;

    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

/// Angle in `[0, pi]` and unit axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisAngle {
    angle: f64,
    axis: Vec3,
}

impl AxisAngle {
    /// Builds an axis-angle pair, normalizing the axis. A zero angle gets the
    /// conventional +z axis; a negative angle flips the axis.
    pub fn new(angle: f64, axis: Vec3) -> Result<Self, Rot3Error> {
        if !angle.is_finite() || angle.abs() > PI + 1e-12 {
            return Err(Rot3Error::InvalidAxisAngle(format!("angle {angle}")));
        }
        if angle == 0.0 {
            return Ok(Self::zero());
        }
        let norm = axis.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Rot3Error::InvalidAxisAngle("zero or non-finite axis".into()));
        }
        let (angle, axis) = if angle < 0.0 {
            (-angle, -axis / norm)
        } else {
            (angle, axis / norm)
        };
        Ok(Self {
            angle: angle.min(PI),
            axis,
        })
    }

    pub fn zero() -> Self {
        Self {
            angle: 0.0,
            axis: Vec3::z(),
        }
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn axis(&self) -> Vec3 {
        self.axis
    }

    /// The rotation vector `theta * r`.
    pub fn vector(&self) -> Vec3 {
        self.axis * self.angle
    }

    pub fn to_rotation(&self) -> RotationMatrix {
        rotation_about(&self.axis, self.angle)
    }
}

/// Extrinsic x-y-z Euler angles: `R = Rz(yaw) * Ry(pitch) * Rx(roll)`.
pub fn rpy_to_matrix(roll: f64, pitch: f64, yaw: f64) -> RotationMatrix {
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sy, cy) = yaw.sin_cos();
    #[rustfmt::skip]
    let m = Matrix3::new(
        cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
        sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
        -sp,     cp * sr,                cp * cr,
    );
    RotationMatrix(m)
}

/// Skew-symmetric matrix with `skew(w) * v == w x v`.
#[rustfmt::skip]
pub fn skew(w: &Vec3) -> Matrix3<f64> {
    Matrix3::new(
        0.0,  -w.z,  w.y,
        w.z,   0.0, -w.x,
       -w.y,   w.x,  0.0,
    )
}

/// Rotation by `angle` about the unit vector `axis`.
pub fn rotation_about(axis: &Vec3, angle: f64) -> RotationMatrix {
    let (s, c) = angle.sin_cos();
    let k = skew(axis);
    RotationMatrix(Matrix3::identity() + k * s + k * k * (1.0 - c))
}

/// Rotation mapping the direction of `f` onto the direction of `f_d`, with the
/// default degeneracy bound [`DEFAULT_FORCE_EPS`].
pub fn rodrigues_between(f: &Vec3, f_d: &Vec3) -> Result<RotationMatrix, Rot3Error> {
    rodrigues_between_eps(f, f_d, DEFAULT_FORCE_EPS)
}

/// `R = I + s S(w) + (1 - c) S(w)^2` with `c`, `s` the cosine and sine of the
/// angle between the inputs and `w` their normalized cross product.
///
/// Within [`ANTIPARALLEL_MARGIN`] of a half turn the cross product carries no
/// usable direction. There the rotation is a half turn about a fixed axis
/// orthogonal to `f`, followed by the small (well-conditioned) rotation from
/// `-f` onto `f_d`.
pub fn rodrigues_between_eps(f: &Vec3, f_d: &Vec3, eps: f64) -> Result<RotationMatrix, Rot3Error> {
    let nf = f.norm();
    let nd = f_d.norm();
    if !(nf > eps) || !nf.is_finite() {
        return Err(Rot3Error::DegenerateForce { norm: nf });
    }
    if !(nd > eps) || !nd.is_finite() {
        return Err(Rot3Error::DegenerateForce { norm: nd });
    }
    let a = f / nf;
    let b = f_d / nd;
    let cross = a.cross(&b);
    let c = a.dot(&b);
    let s = cross.norm();

    if s.atan2(c) > PI - ANTIPARALLEL_MARGIN {
        let half_turn = rotation_about(&orthogonal_axis(&a), PI);
        let flipped = -a;
        let v = flipped.cross(&b);
        let k = skew(&v);
        let small = Matrix3::identity() + k + k * k / (1.0 + flipped.dot(&b));
        return Ok(RotationMatrix(small * half_turn.0));
    }
    if s == 0.0 {
        return Ok(RotationMatrix::identity());
    }
    let w = cross / s;
    let k = skew(&w);
    Ok(RotationMatrix(Matrix3::identity() + k * s + k * k * (1.0 - c)))
}

/// Deterministic unit vector orthogonal to the unit vector `a`: the cross
/// product with the basis vector of smallest `|component|`.
fn orthogonal_axis(a: &Vec3) -> Vec3 {
    let idx = a.iamin();
    let mut e = Vec3::zeros();
    e[idx] = 1.0;
    a.cross(&e).normalize()
}

/// Angle and axis of a rotation. The angle is taken from `atan2` of the
/// antisymmetric and symmetric parts, which stays accurate near 0 and pi.
pub fn axis_angle_of(r: &RotationMatrix) -> AxisAngle {
    let m = &r.0;
    let vee = Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
    let sin_t = 0.5 * vee.norm();
    let cos_t = 0.5 * (m.trace() - 1.0);
    let angle = sin_t.atan2(cos_t).clamp(0.0, PI);

    if angle == 0.0 || sin_t == 0.0 && cos_t > 0.0 {
        return AxisAngle::zero();
    }
    if angle < PI / 2.0 {
        return AxisAngle {
            angle,
            axis: vee / vee.norm(),
        };
    }
    // (R + R^T)/2 - cos(t) I = (1 - cos t) r r^T; take its dominant column.
    let sym = (m + m.transpose()) * 0.5 - Matrix3::identity() * cos_t;
    let (idx, _) =
        (0..3).map(|i| (i, sym[(i, i)])).fold(
            (0, f64::NEG_INFINITY),
            |best, cur| {
                if cur.1 > best.1 {
                    cur
                } else {
                    best
                }
            },
        );
    let mut axis: Vec3 = sym.column(idx).into_owned();
    axis /= axis.norm();
    if axis.dot(&vee) < 0.0 {
        axis = -axis;
    }
    AxisAngle { angle, axis }
}
