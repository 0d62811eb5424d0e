use nalgebra::{Matrix3, Matrix6, RowVector3, RowVector6, Vector3, Vector6};

use crate::geometry::{hat, right_jacobian_inv, Pose, Rotation};

use super::FactorError;

/// Below this separation the Euclidean norm has no usable gradient.
pub const MIN_SEPARATION: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RangeResidual {
    pub residual: f64,
    /// With respect to the pose tangent `[δθ; δp]`.
    pub d_pose: RowVector6<f64>,
    pub d_anchor: RowVector3<f64>,
    pub d_bias: f64,
}

/// Distance from the tag (body pose plus lever arm) to the anchor.
pub fn predicted_range(pose: &Pose, tag_offset: &Vector3<f64>, anchor: &Vector3<f64>) -> f64 {
    (pose.transform_point(tag_offset) - anchor).norm()
}

/// `e = ‖p + R·o − P‖ − (d + b)`.
pub fn range_residual(
    pose: &Pose,
    tag_offset: &Vector3<f64>,
    anchor: &Vector3<f64>,
    bias: f64,
    d: f64,
) -> Result<RangeResidual, FactorError> {
    let v = pose.transform_point(tag_offset) - anchor;
    let n = v.norm();
    if n < MIN_SEPARATION {
        return Err(FactorError::DegenerateGeometry("tag coincides with anchor"));
    }
    let unit = (v / n).transpose();
    // R·Exp(δθ)·o ≈ R·o − R·[o]×·δθ
    let d_rot = -unit * pose.r.matrix() * hat(tag_offset);
    let mut d_pose = RowVector6::zeros();
    d_pose.fixed_view_mut::<1, 3>(0, 0).copy_from(&d_rot);
    d_pose.fixed_view_mut::<1, 3>(0, 3).copy_from(&unit);
    Ok(RangeResidual { residual: n - (d + bias), d_pose, d_anchor: -unit, d_bias: -1.0 })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairResidual {
    pub residual: f64,
    pub d_a: RowVector3<f64>,
    pub d_b: RowVector3<f64>,
}

/// `e = ‖Pa − Pb‖ − d̄`.
pub fn anchor_anchor_residual(pa: &Vector3<f64>, pb: &Vector3<f64>, distance: f64) -> Result<PairResidual, FactorError> {
    let v = pa - pb;
    let n = v.norm();
    if n < MIN_SEPARATION {
        return Err(FactorError::DegenerateGeometry("coincident anchors"));
    }
    let unit = (v / n).transpose();
    Ok(PairResidual { residual: n - distance, d_a: unit, d_b: -unit })
}

/// `e = (Pa.z − h̄) / σ`, returned with its gradient in `Pa`.
pub fn anchor_height_residual(pa: &Vector3<f64>, height: f64, sigma: f64) -> Result<(f64, RowVector3<f64>), FactorError> {
    if !(sigma > 0.0) {
        return Err(FactorError::InvalidInput("height prior sigma must be positive"));
    }
    Ok(((pa.z - height) / sigma, RowVector3::new(0.0, 0.0, 1.0 / sigma)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelativePoseResidual {
    /// `[rotation; translation]`.
    pub residual: Vector6<f64>,
    pub d_i: Matrix6<f64>,
    pub d_j: Matrix6<f64>,
}

/// Tangent-space mismatch between the estimated increment `Ti⁻¹·Tj` and a
/// measured increment `delta`:
/// `[Log(ΔR⁻¹·Riᵀ·Rj); Riᵀ(pj − pi) − Δp]`.
pub fn relative_pose_residual(ti: &Pose, tj: &Pose, delta: &Pose) -> RelativePoseResidual {
    let rij = ti.r.inverse() * tj.r;
    let err_rot = delta.r.inverse() * rij;
    let phi = err_rot.log();
    let dp_world = tj.p - ti.p;
    let dp_body = ti.r.inverse_rotate(&dp_world);

    let jr_inv = right_jacobian_inv(&phi);
    let rjt_ri: Matrix3<f64> = rij.inverse().matrix();
    let rit: Matrix3<f64> = ti.r.inverse().matrix();

    let mut d_i = Matrix6::zeros();
    let mut d_j = Matrix6::zeros();
    d_i.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-jr_inv * rjt_ri));
    d_j.fixed_view_mut::<3, 3>(0, 0).copy_from(&jr_inv);
    d_i.fixed_view_mut::<3, 3>(3, 0).copy_from(&hat(&dp_body));
    d_i.fixed_view_mut::<3, 3>(3, 3).copy_from(&(-rit));
    d_j.fixed_view_mut::<3, 3>(3, 3).copy_from(&rit);

    let mut residual = Vector6::zeros();
    residual.fixed_rows_mut::<3>(0).copy_from(&phi);
    residual.fixed_rows_mut::<3>(3).copy_from(&(dp_body - delta.p));
    RelativePoseResidual { residual, d_i, d_j }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitResidual {
    pub residual: f64,
    pub d_position: RowVector3<f64>,
    pub d_yaw: f64,
}

/// `e = ‖Rz(ψ)·o + p0 − P‖ − d` for the stationary start-up fit.
pub fn init_residual(
    p0: &Vector3<f64>,
    yaw: f64,
    tag_offset: &Vector3<f64>,
    anchor: &Vector3<f64>,
    d: f64,
) -> Result<InitResidual, FactorError> {
    let (s, c) = yaw.sin_cos();
    let rotated = Vector3::new(c * tag_offset.x - s * tag_offset.y, s * tag_offset.x + c * tag_offset.y, tag_offset.z);
    let v = rotated + p0 - anchor;
    let n = v.norm();
    if n < MIN_SEPARATION {
        return Err(FactorError::DegenerateGeometry("tag coincides with anchor"));
    }
    let unit = (v / n).transpose();
    let d_rot = Vector3::new(-s * tag_offset.x - c * tag_offset.y, c * tag_offset.x - s * tag_offset.y, 0.0);
    Ok(InitResidual { residual: n - d, d_position: unit, d_yaw: (unit * d_rot)[0] })
}

/// `[Log(R̄⁻¹·R); p − p̄]` for an absolute pose prior.
pub fn pose_prior_residual(pose: &Pose, prior: &Pose) -> (Vector6<f64>, Matrix6<f64>) {
    let phi = (prior.r.inverse() * pose.r).log();
    let mut residual = Vector6::zeros();
    residual.fixed_rows_mut::<3>(0).copy_from(&phi);
    residual.fixed_rows_mut::<3>(3).copy_from(&(pose.p - prior.p));
    let mut jac = Matrix6::identity();
    jac.fixed_view_mut::<3, 3>(0, 0).copy_from(&right_jacobian_inv(&phi));
    (residual, jac)
}

/// `Rz(ψ)·Ry(0)·Rx(roll)`: level attitude with the body roll convention.
pub fn level_attitude(yaw: f64, roll: f64) -> Rotation {
    Rotation::rot_z(yaw) * Rotation::rot_y(0.0) * Rotation::rot_x(roll)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn range_examples() {
        let id = Pose::identity();
        let a = Vector3::new(3.0, 4.0, 0.0);
        assert_eq!(range_residual(&id, &Vector3::zeros(), &a, 0.0, 5.0).unwrap().residual, 0.0);
        let e = range_residual(&id, &Vector3::zeros(), &a, 0.1, 4.9).unwrap().residual;
        assert!(e.abs() < 1e-15);
        // yawed 90°: lever arm (1,0,0) lands at (0,1,0), one meter from (0,2,0)
        let yawed = Pose::new(0.0, Vector3::zeros(), Rotation::rot_z(FRAC_PI_2));
        let e = range_residual(&yawed, &Vector3::new(1.0, 0.0, 0.0), &Vector3::new(0.0, 2.0, 0.0), 0.0, 1.0).unwrap();
        assert!(e.residual.abs() < 1e-15);
        assert!(matches!(
            range_residual(&id, &Vector3::zeros(), &Vector3::zeros(), 0.0, 1.0),
            Err(FactorError::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn anchor_pair_examples() {
        let r = anchor_anchor_residual(&Vector3::zeros(), &Vector3::new(0.0, 3.0, 0.0), 3.0).unwrap();
        assert_eq!(r.residual, 0.0);
        let r = anchor_anchor_residual(&Vector3::zeros(), &Vector3::new(1.0, 1.0, 1.0), 1.0).unwrap();
        assert!((r.residual - (3f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!((r.residual - 0.7320508).abs() < 1e-7);
        let p = Vector3::new(1.0, 1.0, 1.0);
        assert!(anchor_anchor_residual(&p, &(p + Vector3::new(1e-10, 0.0, 0.0)), 1.0).is_err());
        let q = Vector3::new(-2.0, 0.5, 4.0);
        let ab = anchor_anchor_residual(&p, &q, 2.0).unwrap();
        let ba = anchor_anchor_residual(&q, &p, 2.0).unwrap();
        assert_eq!(ab.residual, ba.residual);
        assert_eq!(ab.d_a, ba.d_b);
    }

    #[test]
    fn height_examples() {
        let (e, _) = anchor_height_residual(&Vector3::new(0.0, 0.0, 1.5), 1.5, 0.2).unwrap();
        assert_eq!(e, 0.0);
        let (e, _) = anchor_height_residual(&Vector3::new(0.0, 0.0, 1.7), 1.5, 0.2).unwrap();
        assert!((e - 1.0).abs() < 1e-12);
        let (e, _) = anchor_height_residual(&Vector3::new(5.0, 2.0, 1.8), 1.5, 0.1).unwrap();
        assert!((e - 3.0).abs() < 1e-12);
        assert!(anchor_height_residual(&Vector3::zeros(), 0.0, 0.0).is_err());
    }

    #[test]
    fn relative_pose_examples() {
        let ti = Pose::new(0.0, Vector3::new(1.0, 2.0, 3.0), Rotation::exp(&Vector3::new(0.1, 0.2, -0.3)));
        let delta = Pose::new(0.0, Vector3::new(0.5, -0.1, 0.2), Rotation::exp(&Vector3::new(0.0, 0.05, 0.1)));
        let tj = ti.compose(&delta);
        assert!(relative_pose_residual(&ti, &tj, &delta).residual.norm() < 1e-15);

        // measured 10° of yaw that the estimate does not have
        let tj = Pose::from_translation(Vector3::new(1.0, 0.0, 0.0));
        let delta = Pose::new(0.0, Vector3::new(1.0, 0.0, 0.0), Rotation::rot_z(10f64.to_radians()));
        let e = relative_pose_residual(&Pose::identity(), &tj, &delta).residual;
        let expected = Vector6::new(0.0, 0.0, -10f64.to_radians(), 0.0, 0.0, 0.0);
        assert!((e - expected).norm() < 1e-15);
    }

    #[test]
    fn init_examples() {
        let r = init_residual(&Vector3::zeros(), 0.0, &Vector3::zeros(), &Vector3::new(0.0, 0.0, 4.0), 4.0).unwrap();
        assert_eq!(r.residual, 0.0);
        let o = Vector3::new(1.0, 0.0, 0.0);
        assert!(init_residual(&Vector3::zeros(), FRAC_PI_2, &o, &Vector3::new(0.0, 1.0, 0.0), 0.0).is_err());
        let r = init_residual(&Vector3::new(2.0, 0.0, 0.0), FRAC_PI_2, &o, &Vector3::new(2.0, 2.0, 0.0), 1.0).unwrap();
        assert!(r.residual.abs() < 1e-15);
    }
}
