use nalgebra::{DMatrix, DVector, Vector3, Vector6};

use crate::factors::FactorError;
use crate::geometry::Pose;

use super::{Loss, SolverError};

/// Kind of a parameter block; fixes its tangent dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockKind {
    Point3,
    Scalar,
    Pose,
    Yaw,
}

impl BlockKind {
    pub fn tangent_dim(self) -> usize {
        match self {
            BlockKind::Point3 => 3,
            BlockKind::Scalar | BlockKind::Yaw => 1,
            BlockKind::Pose => 6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BlockValue {
    Point3(Vector3<f64>),
    Scalar(f64),
    Pose(Pose),
    /// Heading angle, kept wrapped to `[−π, π)`.
    Yaw(f64),
}

impl BlockValue {
    pub fn kind(&self) -> BlockKind {
        match self {
            BlockValue::Point3(_) => BlockKind::Point3,
            BlockValue::Scalar(_) => BlockKind::Scalar,
            BlockValue::Pose(_) => BlockKind::Pose,
            BlockValue::Yaw(_) => BlockKind::Yaw,
        }
    }

    pub fn tangent_dim(&self) -> usize {
        self.kind().tangent_dim()
    }

    /// Applies a tangent-space increment. Pose blocks use the right
    /// multiplicative rotation update and re-normalise the quaternion.
    pub fn retract(&self, delta: &[f64]) -> BlockValue {
        debug_assert_eq!(delta.len(), self.tangent_dim());
        match self {
            BlockValue::Point3(p) => BlockValue::Point3(p + Vector3::from_column_slice(delta)),
            BlockValue::Scalar(x) => BlockValue::Scalar(x + delta[0]),
            BlockValue::Pose(p) => BlockValue::Pose(p.retract(&Vector6::from_column_slice(delta))),
            BlockValue::Yaw(y) => BlockValue::Yaw(wrap_angle(y + delta[0])),
        }
    }

    pub fn point3(&self) -> Result<Vector3<f64>, FactorError> {
        match self {
            BlockValue::Point3(p) => Ok(*p),
            other => Err(FactorError::WrongBlockKind { expected: BlockKind::Point3, found: other.kind() }),
        }
    }

    pub fn scalar(&self) -> Result<f64, FactorError> {
        match self {
            BlockValue::Scalar(x) => Ok(*x),
            other => Err(FactorError::WrongBlockKind { expected: BlockKind::Scalar, found: other.kind() }),
        }
    }

    pub fn pose(&self) -> Result<Pose, FactorError> {
        match self {
            BlockValue::Pose(p) => Ok(*p),
            other => Err(FactorError::WrongBlockKind { expected: BlockKind::Pose, found: other.kind() }),
        }
    }

    pub fn yaw(&self) -> Result<f64, FactorError> {
        match self {
            BlockValue::Yaw(y) => Ok(*y),
            other => Err(FactorError::WrongBlockKind { expected: BlockKind::Yaw, found: other.kind() }),
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            BlockValue::Point3(p) => p.iter().all(|v| v.is_finite()),
            BlockValue::Scalar(x) | BlockValue::Yaw(x) => x.is_finite(),
            BlockValue::Pose(p) => p.is_finite(),
        }
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let w = (a + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if w >= std::f64::consts::PI {
        w - two_pi
    } else {
        w
    }
}

/// Residual vector plus, when requested, one Jacobian per attached block
/// (`dim × tangent_dim` each).
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub residual: DVector<f64>,
    pub jacobians: Vec<DMatrix<f64>>,
}

/// A cost term. Implementations must be pure so they can be evaluated
/// concurrently.
pub trait Residual: Send + Sync {
    fn dim(&self) -> usize;
    fn evaluate(&self, params: &[&BlockValue], jacobians: bool) -> Result<Evaluation, FactorError>;
}

/// Opaque handle to a parameter block inside a [`Problem`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockId(pub(crate) usize);

#[derive(Clone, Debug)]
pub struct ParameterBlock {
    pub value: BlockValue,
    pub constant: bool,
}

pub struct ResidualBlock {
    pub(crate) cost: Box<dyn Residual>,
    pub(crate) blocks: Vec<BlockId>,
    pub(crate) loss: Loss,
    /// Square-root information matrix applied to residual and Jacobians.
    pub(crate) sqrt_info: Option<DMatrix<f64>>,
}

impl ResidualBlock {
    pub fn blocks(&self) -> &[BlockId] {
        &self.blocks
    }

    pub fn loss(&self) -> Loss {
        self.loss
    }
}

#[derive(Default)]
pub struct Problem {
    pub(crate) blocks: Vec<ParameterBlock>,
    pub(crate) residuals: Vec<ResidualBlock>,
}

impl Problem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_block(&mut self, value: BlockValue) -> BlockId {
        self.blocks.push(ParameterBlock { value, constant: false });
        BlockId(self.blocks.len() - 1)
    }

    pub fn add_constant_block(&mut self, value: BlockValue) -> BlockId {
        self.blocks.push(ParameterBlock { value, constant: true });
        BlockId(self.blocks.len() - 1)
    }

    pub fn set_constant(&mut self, id: BlockId, constant: bool) {
        self.blocks[id.0].constant = constant;
    }

    pub fn is_constant(&self, id: BlockId) -> bool {
        self.blocks[id.0].constant
    }

    pub fn add_residual<R: Residual + 'static>(&mut self, cost: R, blocks: &[BlockId], loss: Loss) {
        self.residuals.push(ResidualBlock { cost: Box::new(cost), blocks: blocks.to_vec(), loss, sqrt_info: None });
    }

    pub fn add_weighted_residual<R: Residual + 'static>(
        &mut self,
        cost: R,
        blocks: &[BlockId],
        loss: Loss,
        sqrt_info: DMatrix<f64>,
    ) {
        self.residuals.push(ResidualBlock { cost: Box::new(cost), blocks: blocks.to_vec(), loss, sqrt_info: Some(sqrt_info) });
    }

    pub fn value(&self, id: BlockId) -> &BlockValue {
        &self.blocks[id.0].value
    }

    pub fn set_value(&mut self, id: BlockId, value: BlockValue) {
        self.blocks[id.0].value = value;
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn num_residuals(&self) -> usize {
        self.residuals.len()
    }

    pub fn residual_blocks(&self) -> &[ResidualBlock] {
        &self.residuals
    }

    /// Checks block references, weight shapes and that something is free.
    pub fn validate(&self) -> Result<(), SolverError> {
        for (i, rb) in self.residuals.iter().enumerate() {
            for b in &rb.blocks {
                if b.0 >= self.blocks.len() {
                    return Err(SolverError::Structural(format!("residual {i} references missing block {}", b.0)));
                }
            }
            if let Some(w) = &rb.sqrt_info {
                let d = rb.cost.dim();
                if w.nrows() != d || w.ncols() != d {
                    return Err(SolverError::Structural(format!(
                        "residual {i}: weight is {}x{}, residual dimension is {d}",
                        w.nrows(),
                        w.ncols()
                    )));
                }
            }
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if !b.value.is_finite() {
                return Err(SolverError::NumericalFailure(format!("block {i} has non-finite value")));
            }
        }
        if self.blocks.iter().all(|b| b.constant) {
            return Err(SolverError::Structural("problem has no free parameter block".into()));
        }
        Ok(())
    }

    /// Total robust cost `Σ ρ(‖W·r‖²)` at the current values.
    pub fn cost(&self) -> Result<f64, SolverError> {
        let mut total = 0.0;
        for rb in &self.residuals {
            let params: Vec<&BlockValue> = rb.blocks.iter().map(|b| &self.blocks[b.0].value).collect();
            let eval = rb.cost.evaluate(&params, false).map_err(|e| SolverError::NumericalFailure(e.to_string()))?;
            total += rb.loss.evaluate(whitened_sq_norm(&eval.residual, rb.sqrt_info.as_ref()))[0];
        }
        Ok(total)
    }
}

pub(crate) fn whitened_sq_norm(r: &DVector<f64>, w: Option<&DMatrix<f64>>) -> f64 {
    match w {
        Some(w) => (w * r).norm_squared(),
        None => r.norm_squared(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn wrap_range() {
        for a in [-10.0, -PI, -3.0, 0.0, 3.0, PI, 7.5] {
            let w = wrap_angle(a);
            assert!((-PI..PI).contains(&w), "{a} -> {w}");
            assert!(((w - a) / (2.0 * PI)).round() * 2.0 * PI - (w - a) < 1e-12);
        }
    }

    #[test]
    fn pose_retract_keeps_unit_norm() {
        let mut v = BlockValue::Pose(Pose::identity());
        for i in 0..1000 {
            let s = (i as f64).sin();
            v = v.retract(&[0.3 * s, -0.2, 0.1 * s, 1.0, 0.0, s]);
        }
        let q = v.pose().unwrap().r.wxyz();
        let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-12);
    }
}
