//! Residual definitions shared by calibration and fusion.
//!
//! Range residuals follow `e = predicted − (measured + bias)` everywhere, so
//! the bias-corrected measurement is always `measured + bias`.

mod costs;
mod residuals;
mod types;

use thiserror::Error;

use crate::solver::BlockKind;

pub use costs::{
    AnchorHeightCost, AnchorPairCost, InitRangeCost, InterpolatedRangeCost, KnownPoseRangeCost, PosePriorCost,
    RangeCost, RelativePoseCost,
};
pub use residuals::{
    anchor_anchor_residual, anchor_height_residual, init_residual, level_attitude, pose_prior_residual,
    predicted_range, range_residual, relative_pose_residual, InitResidual, PairResidual, RangeResidual,
    RelativePoseResidual, MIN_SEPARATION,
};
pub use types::{AnchorHeightPrior, AnchorId, AnchorPairPrior, Link, LinkBias, RangeMeasurement, TagExtrinsics, TagId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FactorError {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error("expected a {expected:?} block, found {found:?}")]
    WrongBlockKind { expected: BlockKind, found: BlockKind },
}
