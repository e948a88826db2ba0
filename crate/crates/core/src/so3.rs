//! Rotation-group primitives.
//!
//! Attitude is kept as a full direction-cosine matrix because the filter's
//! retraction composes matrices directly. Tangent vectors are axis-angle
//! vectors in radians.

use std::f64::consts::PI;
use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};

/// Axis-angle vector, radians.
pub type RotationVector = Vector3<f64>;

const SMALL_ANGLE: f64 = 1e-8;
const NEAR_PI: f64 = 1e-4;
/// Orthogonality residual above which a rotation is re-orthonormalized.
pub const ORTHONORMALITY_TOLERANCE: f64 = 1e-9;
const GIMBAL_LOCK_MARGIN: f64 = 1e-6;

/// A proper rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Wraps a matrix without checking orthonormality.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    /// Wraps a matrix, projecting it back onto SO(3) if it has drifted.
    /// Returns `None` for matrices that are not close to a proper rotation.
    pub fn from_matrix(m: Matrix3<f64>) -> Option<Self> {
        if !m.iter().all(|v| v.is_finite()) || m.determinant() <= 0.0 {
            return None;
        }
        let r = Self(m);
        if r.orthonormality_residual() < 1e-3 {
            Some(r.renormalized())
        } else {
            None
        }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// Frobenius norm of R^T R - I.
    pub fn orthonormality_residual(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).norm()
    }

    /// Nearest rotation via Newton iteration on the polar decomposition.
    /// Valid for matrices already close to orthonormal.
    pub fn renormalized(&self) -> Self {
        let mut m = self.0;
        for _ in 0..4 {
            let residual = m.transpose() * m;
            m = m * (Matrix3::identity() * 1.5 - residual * 0.5);
            if (m.transpose() * m - Matrix3::identity()).norm() < 1e-15 {
                break;
            }
        }
        Self(m)
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    pub fn angle_to(&self, other: &Rotation) -> f64 {
        log_so3(&(*self * other.transpose())).norm()
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<&Vector3<f64>> for &Rotation {
    type Output = Vector3<f64>;

    fn mul(self, rhs: &Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

/// Cross-product matrix: `skew(a) * b == a.cross(&b)`.
#[inline]
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`skew`] applied to the antisymmetric part of `m`.
#[inline]
fn vee_antisymmetric(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) * 0.5
}

/// Exponential map (Rodrigues formula).
pub fn exp_so3(phi: &RotationVector) -> Rotation {
    let theta_sq = phi.norm_squared();
    let k = skew(phi);
    let k2 = k * k;
    let (a, b) = if theta_sq < SMALL_ANGLE * SMALL_ANGLE {
        (1.0 - theta_sq / 6.0, 0.5 - theta_sq / 24.0)
    } else {
        let theta = theta_sq.sqrt();
        let (s, c) = theta.sin_cos();
        (s / theta, (1.0 - c) / theta_sq)
    };
    Rotation(Matrix3::identity() + k * a + k2 * b)
}

/// Logarithm map; the returned magnitude lies in [0, pi].
pub fn log_so3(r: &Rotation) -> RotationVector {
    let m = r.matrix();
    let w = vee_antisymmetric(m);
    let cos_theta = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let sin_theta = w.norm();
    let theta = sin_theta.atan2(cos_theta);

    if theta < SMALL_ANGLE {
        return w;
    }
    if PI - theta > NEAR_PI {
        return w * (theta / sin_theta);
    }

    // Near pi the antisymmetric part vanishes; recover the axis from the
    // symmetric part, which is cos(theta) I + (1 - cos(theta)) n n^T.
    let sym = (m + m.transpose()) * 0.5;
    let one_minus_cos = 1.0 - cos_theta;
    let mut pivot = 0;
    for i in 1..3 {
        if sym[(i, i)] > sym[(pivot, pivot)] {
            pivot = i;
        }
    }
    let mut axis = Vector3::zeros();
    let n_pivot = ((sym[(pivot, pivot)] - cos_theta) / one_minus_cos).max(0.0).sqrt();
    axis[pivot] = n_pivot;
    for j in 0..3 {
        if j != pivot {
            axis[j] = sym[(pivot, j)] / (one_minus_cos * n_pivot);
        }
    }
    let axis = axis.normalize();
    if axis.dot(&w) < 0.0 {
        -axis * theta
    } else {
        axis * theta
    }
}

/// Roll, pitch and heading of a body-to-navigation rotation (Z-Y-X convention).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    /// In (-pi, pi].
    pub heading: f64,
    /// Pitch is within 1e-6 rad of +-pi/2; roll and heading are not separable.
    pub gimbal_lock: bool,
}

pub fn to_euler(c_b_n: &Rotation) -> EulerAngles {
    let m = c_b_n.matrix();
    let pitch = (-m[(2, 0)]).clamp(-1.0, 1.0).asin();
    let roll = m[(2, 1)].atan2(m[(2, 2)]);
    let mut heading = m[(1, 0)].atan2(m[(0, 0)]);
    if heading <= -PI {
        heading += 2.0 * PI;
    }
    EulerAngles {
        roll,
        pitch,
        heading,
        gimbal_lock: (std::f64::consts::FRAC_PI_2 - pitch.abs()) < GIMBAL_LOCK_MARGIN,
    }
}

/// Body-to-navigation rotation from roll, pitch, heading.
pub fn from_euler(roll: f64, pitch: f64, heading: f64) -> Rotation {
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sh, ch) = heading.sin_cos();
    Rotation(Matrix3::new(
        ch * cp,
        ch * sp * sr - sh * cr,
        ch * sp * cr + sh * sr,
        sh * cp,
        sh * sp * sr + ch * cr,
        sh * sp * cr - ch * sr,
        -sp,
        cp * sr,
        cp * cr,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn skew_examples() {
        let e1 = Vector3::x();
        let e2 = Vector3::y();
        assert_eq!(skew(&e1) * e2, Vector3::z());
        let v = Vector3::new(1.0, 2.0, 3.0);
        assert_eq!(skew(&v) * v, Vector3::zeros());
        let s = skew(&v);
        assert_eq!(s.diagonal(), Vector3::zeros());
        assert_eq!(s[(0, 1)], -3.0);
        assert_eq!(s + s.transpose(), Matrix3::zeros());
    }

    #[test]
    fn exp_examples() {
        assert_eq!(exp_so3(&Vector3::zeros()), Rotation::identity());
        let r = exp_so3(&Vector3::new(0.0, 0.0, FRAC_PI_2));
        assert_relative_eq!(r.rotate(&Vector3::x()), Vector3::y(), epsilon = 1e-12);
        let phi = Vector3::new(0.3, -1.1, 0.4);
        let prod = exp_so3(&phi) * exp_so3(&-phi);
        assert_relative_eq!(*prod.matrix(), Matrix3::identity(), epsilon = 1e-12);
    }

    #[test]
    fn log_examples() {
        assert_eq!(log_so3(&Rotation::identity()), Vector3::zeros());
        let phi = Vector3::new(0.1, -0.2, 0.3);
        assert_relative_eq!(log_so3(&exp_so3(&phi)), phi, epsilon = 1e-12);
        let half_turn = Rotation::from_matrix_unchecked(Matrix3::from_diagonal(&Vector3::new(-1.0, -1.0, 1.0)));
        let log = log_so3(&half_turn);
        assert!((log.norm() - PI).abs() < 1e-9);
        assert_relative_eq!(log.normalize().z.abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn log_near_pi_round_trips() {
        for angle in [PI - 1e-3, PI - 1e-5, PI - 1e-8, PI] {
            let phi = Vector3::new(0.2, -0.5, 0.7).normalize() * angle;
            let back = log_so3(&exp_so3(&phi));
            let r1 = exp_so3(&back);
            assert_relative_eq!(*r1.matrix(), *exp_so3(&phi).matrix(), epsilon = 1e-9);
            assert!(back.norm() <= PI + 1e-12);
        }
    }

    #[test]
    fn euler_examples() {
        let e = to_euler(&Rotation::identity());
        assert_eq!((e.roll, e.pitch, e.heading), (0.0, 0.0, 0.0));
        let yaw = to_euler(&exp_so3(&Vector3::new(0.0, 0.0, FRAC_PI_2)));
        assert_relative_eq!(yaw.heading, FRAC_PI_2, epsilon = 1e-12);
        let r = from_euler(0.1, -0.4, 2.5);
        let e = to_euler(&r);
        assert_relative_eq!(e.roll, 0.1, epsilon = 1e-12);
        assert_relative_eq!(e.pitch, -0.4, epsilon = 1e-12);
        assert_relative_eq!(e.heading, 2.5, epsilon = 1e-12);
        assert!(!e.gimbal_lock);
        assert!(to_euler(&from_euler(0.0, FRAC_PI_2, 0.0)).gimbal_lock);
        assert_eq!(to_euler(&from_euler(0.0, 0.0, PI)).heading, PI);
    }

    #[test]
    fn renormalize_restores_orthonormality() {
        let r = exp_so3(&Vector3::new(0.4, 0.1, -0.9));
        let perturbed = Rotation::from_matrix_unchecked(r.matrix() + Matrix3::from_element(1e-6));
        assert!(perturbed.orthonormality_residual() > 1e-7);
        let fixed = perturbed.renormalized();
        assert!(fixed.orthonormality_residual() < 1e-14);
        assert!(fixed.angle_to(&r) < 1e-5);
        assert!(Rotation::from_matrix(Matrix3::from_element(2.0)).is_none());
    }
}
