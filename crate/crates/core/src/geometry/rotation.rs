use std::ops::Mul;

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3, Vector4};

/// Below this angle the exp/log maps switch to their series expansions.
const SMALL_ANGLE: f64 = 1e-6;

/// Unit quaternion rotation, canonicalised so that `w >= 0`.
///
/// Every constructor and every operation renormalises, so the stored
/// quaternion is always unit norm to machine precision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation(UnitQuaternion<f64>);

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation(UnitQuaternion::identity())
    }

    /// Builds a rotation from raw `(w, x, y, z)` components. Returns `None`
    /// for zero-norm or non-finite input.
    pub fn from_wxyz(w: f64, x: f64, y: f64, z: f64) -> Option<Self> {
        let q = Quaternion::new(w, x, y, z);
        let n = q.norm();
        if !n.is_finite() || n < f64::EPSILON {
            return None;
        }
        Some(Self::canonical(q))
    }

    pub fn from_unit_quaternion(q: UnitQuaternion<f64>) -> Self {
        Self::canonical(q.into_inner())
    }

    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        let rot = nalgebra::Rotation3::from_matrix_unchecked(*m);
        Self::from_unit_quaternion(UnitQuaternion::from_rotation_matrix(&rot))
    }

    fn canonical(q: Quaternion<f64>) -> Self {
        // leave already-unit input untouched so normalisation is idempotent
        let n = q.norm();
        let q = if (n - 1.0).abs() <= 4.0 * f64::EPSILON { q } else { q / n };
        let q = if q.w < 0.0 { -q } else { q };
        Rotation(UnitQuaternion::new_unchecked(q))
    }

    pub fn rot_x(angle: f64) -> Self {
        Self::exp(&Vector3::new(angle, 0.0, 0.0))
    }

    pub fn rot_y(angle: f64) -> Self {
        Self::exp(&Vector3::new(0.0, angle, 0.0))
    }

    pub fn rot_z(angle: f64) -> Self {
        Self::exp(&Vector3::new(0.0, 0.0, angle))
    }

    pub fn quaternion(&self) -> &UnitQuaternion<f64> {
        &self.0
    }

    /// Components as `(w, x, y, z)`.
    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.0.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    fn coords_wxyz(&self) -> Vector4<f64> {
        let [w, x, y, z] = self.wxyz();
        Vector4::new(w, x, y, z)
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        self.0.to_rotation_matrix().into_inner()
    }

    pub fn inverse(&self) -> Self {
        Self::canonical(self.0.inverse().into_inner())
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0.transform_vector(v)
    }

    pub fn inverse_rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0.inverse_transform_vector(v)
    }

    /// Exponential map from an axis-angle vector.
    pub fn exp(omega: &Vector3<f64>) -> Self {
        let theta = omega.norm();
        let half = 0.5 * theta;
        let (w, k) = if theta < SMALL_ANGLE {
            // cos(θ/2) ≈ 1 − θ²/8, sin(θ/2)/θ ≈ 1/2 − θ²/48
            (1.0 - theta * theta / 8.0, 0.5 - theta * theta / 48.0)
        } else {
            (half.cos(), half.sin() / theta)
        };
        Self::canonical(Quaternion::new(w, k * omega.x, k * omega.y, k * omega.z))
    }

    /// Logarithm map returning the axis-angle vector with angle in `[0, π]`.
    ///
    /// Because the quaternion is kept in the `w >= 0` hemisphere the
    /// two-argument arctangent is well conditioned up to and including
    /// θ = π, where the axis is the normalised vector part.
    pub fn log(&self) -> Vector3<f64> {
        let [w, x, y, z] = self.wxyz();
        let v = Vector3::new(x, y, z);
        let n = v.norm();
        if n < 0.5 * SMALL_ANGLE {
            // θ ≈ 2n, first-order: θ·axis ≈ 2v / w
            return v * (2.0 / w);
        }
        let theta = 2.0 * n.atan2(w);
        v * (theta / n)
    }

    /// Geodesic angle between two rotations, radians.
    pub fn angle_to(&self, other: &Rotation) -> f64 {
        (self.inverse() * *other).log().norm()
    }

    /// Spherical linear interpolation along the shortest arc.
    pub fn slerp(&self, other: &Rotation, u: f64) -> Rotation {
        let q0 = self.coords_wxyz();
        let mut q1 = other.coords_wxyz();
        if q0.dot(&q1) < 0.0 {
            q1 = -q1;
        }
        // Angle between the two unit 4-vectors, robust near 0.
        let omega = 2.0 * (q1 - q0).norm().atan2((q1 + q0).norm());
        let mixed = if omega < 1e-12 {
            q0 * (1.0 - u) + q1 * u
        } else {
            let s = omega.sin();
            q0 * (((1.0 - u) * omega).sin() / s) + q1 * ((u * omega).sin() / s)
        };
        Self::canonical(Quaternion::new(mixed[0], mixed[1], mixed[2], mixed[3]))
    }

    /// Yaw angle (rotation of the body x-axis about world z), radians.
    pub fn yaw(&self) -> f64 {
        let m = self.matrix();
        m[(1, 0)].atan2(m[(0, 0)])
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation::canonical((self.0 * rhs.0).into_inner())
    }
}

impl Mul<Vector3<f64>> for Rotation {
    type Output = Vector3<f64>;

    fn mul(self, rhs: Vector3<f64>) -> Vector3<f64> {
        self.rotate(&rhs)
    }
}

pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Right Jacobian of SO(3): `Exp(φ + δ) ≈ Exp(φ)·Exp(Jr(φ)·δ)`.
pub fn right_jacobian(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let k = hat(phi);
    if theta < SMALL_ANGLE {
        return Matrix3::identity() - 0.5 * k + (1.0 / 6.0) * k * k;
    }
    let t2 = theta * theta;
    Matrix3::identity() - ((1.0 - theta.cos()) / t2) * k
        + ((theta - theta.sin()) / (t2 * theta)) * k * k
}

/// Inverse of [`right_jacobian`]: `Log(Exp(φ)·Exp(δ)) ≈ φ + Jr⁻¹(φ)·δ`.
pub fn right_jacobian_inv(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let k = hat(phi);
    if theta < SMALL_ANGLE {
        return Matrix3::identity() + 0.5 * k + (1.0 / 12.0) * k * k;
    }
    let t2 = theta * theta;
    let coeff = 1.0 / t2 - (1.0 + theta.cos()) / (2.0 * theta * theta.sin());
    Matrix3::identity() + 0.5 * k + coeff * k * k
}
