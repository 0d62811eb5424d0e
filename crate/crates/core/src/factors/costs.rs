//! [`Residual`] adapters wiring the residual functions into solver problems.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::geometry::{interpolate_with_jacobians, Pose};
use crate::solver::{BlockValue, Evaluation, Residual};

use super::residuals::*;
use super::FactorError;

fn scalar(e: f64) -> DVector<f64> {
    DVector::from_element(1, e)
}

fn row(values: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(1, values.len(), values)
}

/// Range with pose, anchor and bias all as parameter blocks
/// (`[Pose, Point3, Scalar]`).
#[derive(Clone, Debug)]
pub struct RangeCost {
    pub tag_offset: Vector3<f64>,
    pub d: f64,
}

impl Residual for RangeCost {
    fn dim(&self) -> usize {
        1
    }

    fn evaluate(&self, p: &[&BlockValue], jac: bool) -> Result<Evaluation, FactorError> {
        let r = range_residual(&p[0].pose()?, &self.tag_offset, &p[1].point3()?, p[2].scalar()?, self.d)?;
        let jacobians = if jac {
            vec![row(r.d_pose.as_slice()), row(r.d_anchor.as_slice()), row(&[r.d_bias])]
        } else {
            vec![]
        };
        Ok(Evaluation { residual: scalar(r.residual), jacobians })
    }
}

/// Calibration range factor: the tag pose is known (interpolated from the
/// SLAM trajectory), anchor and bias are estimated (`[Point3, Scalar]`).
#[derive(Clone, Debug)]
pub struct KnownPoseRangeCost {
    pub pose: Pose,
    pub tag_offset: Vector3<f64>,
    pub d: f64,
}

impl Residual for KnownPoseRangeCost {
    fn dim(&self) -> usize {
        1
    }

    fn evaluate(&self, p: &[&BlockValue], jac: bool) -> Result<Evaluation, FactorError> {
        let r = range_residual(&self.pose, &self.tag_offset, &p[0].point3()?, p[1].scalar()?, self.d)?;
        let jacobians = if jac { vec![row(r.d_anchor.as_slice()), row(&[r.d_bias])] } else { vec![] };
        Ok(Evaluation { residual: scalar(r.residual), jacobians })
    }
}

/// Fusion range factor: the tag pose is interpolated between two estimated
/// poses at weight `u`; anchor and bias are fixed (`[Pose, Pose]`).
#[derive(Clone, Debug)]
pub struct InterpolatedRangeCost {
    pub u: f64,
    pub tag_offset: Vector3<f64>,
    pub anchor: Vector3<f64>,
    pub bias: f64,
    pub d: f64,
}

impl Residual for InterpolatedRangeCost {
    fn dim(&self) -> usize {
        1
    }

    fn evaluate(&self, p: &[&BlockValue], jac: bool) -> Result<Evaluation, FactorError> {
        let (a, b) = (p[0].pose()?, p[1].pose()?);
        let (pose, ja, jb) = interpolate_with_jacobians(&a, &b, self.u);
        let r = range_residual(&pose, &self.tag_offset, &self.anchor, self.bias, self.d)?;
        let jacobians = if jac {
            vec![row((r.d_pose * ja).as_slice()), row((r.d_pose * jb).as_slice())]
        } else {
            vec![]
        };
        Ok(Evaluation { residual: scalar(r.residual), jacobians })
    }
}

/// `[Point3, Point3]`.
#[derive(Clone, Debug)]
pub struct AnchorPairCost {
    pub distance: f64,
}

impl Residual for AnchorPairCost {
    fn dim(&self) -> usize {
        1
    }

    fn evaluate(&self, p: &[&BlockValue], jac: bool) -> Result<Evaluation, FactorError> {
        let r = anchor_anchor_residual(&p[0].point3()?, &p[1].point3()?, self.distance)?;
        let jacobians = if jac { vec![row(r.d_a.as_slice()), row(r.d_b.as_slice())] } else { vec![] };
        Ok(Evaluation { residual: scalar(r.residual), jacobians })
    }
}

/// `[Point3]`.
#[derive(Clone, Debug)]
pub struct AnchorHeightCost {
    pub height: f64,
    pub sigma: f64,
}

impl Residual for AnchorHeightCost {
    fn dim(&self) -> usize {
        1
    }

    fn evaluate(&self, p: &[&BlockValue], jac: bool) -> Result<Evaluation, FactorError> {
        let (e, d) = anchor_height_residual(&p[0].point3()?, self.height, self.sigma)?;
        Ok(Evaluation { residual: scalar(e), jacobians: if jac { vec![row(d.as_slice())] } else { vec![] } })
    }
}

/// Odometry increment between consecutive poses (`[Pose, Pose]`).
#[derive(Clone, Debug)]
pub struct RelativePoseCost {
    pub delta: Pose,
}

impl Residual for RelativePoseCost {
    fn dim(&self) -> usize {
        6
    }

    fn evaluate(&self, p: &[&BlockValue], jac: bool) -> Result<Evaluation, FactorError> {
        let r = relative_pose_residual(&p[0].pose()?, &p[1].pose()?, &self.delta);
        let jacobians = if jac {
            vec![DMatrix::from_column_slice(6, 6, r.d_i.as_slice()), DMatrix::from_column_slice(6, 6, r.d_j.as_slice())]
        } else {
            vec![]
        };
        Ok(Evaluation { residual: DVector::from_column_slice(r.residual.as_slice()), jacobians })
    }
}

/// Stationary start-up range (`[Point3, Yaw]`).
#[derive(Clone, Debug)]
pub struct InitRangeCost {
    pub tag_offset: Vector3<f64>,
    pub anchor: Vector3<f64>,
    pub d: f64,
}

impl Residual for InitRangeCost {
    fn dim(&self) -> usize {
        1
    }

    fn evaluate(&self, p: &[&BlockValue], jac: bool) -> Result<Evaluation, FactorError> {
        let r = init_residual(&p[0].point3()?, p[1].yaw()?, &self.tag_offset, &self.anchor, self.d)?;
        let jacobians = if jac { vec![row(r.d_position.as_slice()), row(&[r.d_yaw])] } else { vec![] };
        Ok(Evaluation { residual: scalar(r.residual), jacobians })
    }
}

/// Absolute prior on a pose (`[Pose]`); weight it through the square-root
/// information matrix.
#[derive(Clone, Debug)]
pub struct PosePriorCost {
    pub prior: Pose,
}

impl Residual for PosePriorCost {
    fn dim(&self) -> usize {
        6
    }

    fn evaluate(&self, p: &[&BlockValue], jac: bool) -> Result<Evaluation, FactorError> {
        let (e, j) = pose_prior_residual(&p[0].pose()?, &self.prior);
        let jacobians = if jac { vec![DMatrix::from_column_slice(6, 6, j.as_slice())] } else { vec![] };
        Ok(Evaluation { residual: DVector::from_column_slice(e.as_slice()), jacobians })
    }
}
