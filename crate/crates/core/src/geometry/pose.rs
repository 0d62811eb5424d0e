use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};

use super::rotation::{right_jacobian, right_jacobian_inv, Rotation};

/// Timestamped rigid transform of the body in some reference frame.
///
/// Group operations act on the transform only. `compose` stamps the result
/// with the right operand's time and `inverse` keeps the time unchanged.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Pose {
    pub t: f64,
    pub p: Vector3<f64>,
    pub r: Rotation,
}

impl Pose {
    pub fn new(t: f64, p: Vector3<f64>, r: Rotation) -> Self {
        Pose { t, p, r }
    }

    pub fn identity() -> Self {
        Pose::default()
    }

    pub fn from_translation(p: Vector3<f64>) -> Self {
        Pose { t: 0.0, p, r: Rotation::identity() }
    }

    pub fn at(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.p.iter().all(|v| v.is_finite())
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose { t: other.t, p: self.p + self.r.rotate(&other.p), r: self.r * other.r }
    }

    pub fn inverse(&self) -> Pose {
        Pose { t: self.t, p: -self.r.inverse_rotate(&self.p), r: self.r.inverse() }
    }

    /// Relative transform `self⁻¹ · other`.
    pub fn between(&self, other: &Pose) -> Pose {
        let r = self.r.inverse() * other.r;
        Pose { t: other.t, p: self.r.inverse_rotate(&(other.p - self.p)), r }
    }

    pub fn transform_point(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.p + self.r.rotate(v)
    }

    /// Applies a tangent increment `[δθ; δp]`: the rotation is perturbed on
    /// the right (`R·Exp(δθ)`) and the translation additively.
    pub fn retract(&self, delta: &Vector6<f64>) -> Pose {
        let dtheta = Vector3::new(delta[0], delta[1], delta[2]);
        let dp = Vector3::new(delta[3], delta[4], delta[5]);
        Pose { t: self.t, p: self.p + dp, r: self.r * Rotation::exp(&dtheta) }
    }
}

/// Linear/slerp interpolation between `a` and `b` at weight `u`, together
/// with the 6×6 Jacobians of the interpolated pose with respect to the
/// tangent increments of `a` and `b` (rotation first, then translation).
pub fn interpolate_with_jacobians(a: &Pose, b: &Pose, u: f64) -> (Pose, Matrix6<f64>, Matrix6<f64>) {
    let rel = a.r.inverse() * b.r;
    let phi = rel.log();
    let exp_u = Rotation::exp(&(u * phi));
    let r = a.r * exp_u;
    let p = (1.0 - u) * a.p + u * b.p;
    let t = (1.0 - u) * a.t + u * b.t;

    let jr_u = right_jacobian(&(u * phi));
    let jr_inv = right_jacobian_inv(&phi);
    let dr_db = u * jr_u * jr_inv;
    let dr_da: Matrix3<f64> = exp_u.inverse().matrix() - dr_db * rel.inverse().matrix();

    let mut ja = Matrix6::zeros();
    let mut jb = Matrix6::zeros();
    ja.fixed_view_mut::<3, 3>(0, 0).copy_from(&dr_da);
    jb.fixed_view_mut::<3, 3>(0, 0).copy_from(&dr_db);
    ja.fixed_view_mut::<3, 3>(3, 3).copy_from(&(Matrix3::identity() * (1.0 - u)));
    jb.fixed_view_mut::<3, 3>(3, 3).copy_from(&(Matrix3::identity() * u));
    (Pose { t, p, r }, ja, jb)
}
