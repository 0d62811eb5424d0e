//! Start-up pose from ranges collected while the platform stands still.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::apc::trilaterate;
use crate::factors::{level_attitude, AnchorId, InitRangeCost, LinkBias, RangeMeasurement, TagExtrinsics};
use crate::geometry::{Pose, Rotation};
use crate::solver::{self, wrap_angle, BlockValue, Loss, Problem, SolverOptions};

use super::{FusionConfig, FusionError};

/// Two starts whose costs are within this fraction are considered tied.
const TIE_FRACTION: f64 = 0.01;
const TIE_FLOOR: f64 = 1e-12;
const DISTINCT_YAW_DEG: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitStart {
    pub seed_yaw: f64,
    pub yaw: f64,
    pub cost: f64,
}

/// Two starts that reached nearly equal cost at clearly different yaws.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ambiguity {
    pub best: InitStart,
    pub rival: InitStart,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitResult {
    pub pose: Pose,
    pub yaw: f64,
    pub cost: f64,
    /// Ranges that entered the fit.
    pub used: usize,
    pub starts: Vec<InitStart>,
    /// Set when the yaw is not pinned down; the lowest-cost start is still
    /// returned.
    pub ambiguity: Option<Ambiguity>,
}

fn init_solver() -> SolverOptions {
    SolverOptions { max_iters: 200, rel_tol: 1e-15, grad_tol: 1e-13, ..SolverOptions::default() }
}

/// Fit position and yaw at time `t0` to stationary ranges, with pitch fixed
/// at zero and roll at the configured convention.
pub fn initialize(
    t0: f64,
    stationary: &[RangeMeasurement],
    anchors: &BTreeMap<AnchorId, Vector3<f64>>,
    biases: &LinkBias,
    extrinsics: &TagExtrinsics,
    cfg: &FusionConfig,
) -> Result<InitResult, FusionError> {
    // (lever arm in the level frame, anchor, corrected range)
    let level = Rotation::rot_y(0.0) * Rotation::rot_x(cfg.roll_convention);
    let mut seen = BTreeSet::new();
    let usable: Vec<(Vector3<f64>, Vector3<f64>, f64)> = stationary
        .iter()
        .filter(|m| m.is_valid())
        .filter_map(|m| {
            let o = extrinsics.get(&m.tag)?;
            let a = anchors.get(&m.anchor)?;
            seen.insert(&m.anchor);
            Some((level.rotate(o), *a, m.d + biases.get(&m.tag, &m.anchor)))
        })
        .collect();
    if usable.len() < 4 || seen.len() < 2 {
        return Err(FusionError::InsufficientInit { ranges: usable.len(), anchors: seen.len() });
    }

    let points: Vec<Vector3<f64>> = usable.iter().map(|u| u.1).collect();
    let ranges: Vec<f64> = usable.iter().map(|u| u.2).collect();
    let p_start = trilaterate(&points, &ranges).unwrap_or_else(|| points.iter().sum::<Vector3<f64>>() / points.len() as f64);

    let opts = SolverOptions { execution: cfg.solver.execution, ..init_solver() };
    let mut starts = Vec::with_capacity(cfg.yaw_starts);
    let mut best: Option<(Vector3<f64>, InitStart)> = None;
    for i in 0..cfg.yaw_starts.max(1) {
        let seed_yaw = wrap_angle(-std::f64::consts::PI + std::f64::consts::TAU * i as f64 / cfg.yaw_starts.max(1) as f64);
        let mut problem = Problem::new();
        let p = problem.add_block(BlockValue::Point3(p_start));
        let y = problem.add_block(BlockValue::Yaw(seed_yaw));
        for (o, a, d) in &usable {
            problem.add_residual(InitRangeCost { tag_offset: *o, anchor: *a, d: *d }, &[p, y], Loss::Cauchy(cfg.cauchy_scale));
        }
        let report = solver::solve(&mut problem, &opts)?;
        let start = InitStart { seed_yaw, yaw: problem.value(y).yaw()?, cost: report.final_cost };
        if best.as_ref().is_none_or(|(_, b)| start.cost < b.cost) {
            best = Some((problem.value(p).point3()?, start));
        }
        starts.push(start);
    }
    let (position, best) = best.expect("at least one start");

    let ambiguity = starts
        .iter()
        .filter(|s| s.cost <= best.cost * (1.0 + TIE_FRACTION) + TIE_FLOOR)
        .find(|s| wrap_angle(s.yaw - best.yaw).abs() > DISTINCT_YAW_DEG.to_radians())
        .map(|rival| Ambiguity { best, rival: *rival });
    if let Some(a) = &ambiguity {
        log::warn!(
            "ambiguous initial yaw: {:.2} deg (cost {:.3e}) vs {:.2} deg (cost {:.3e})",
            a.best.yaw.to_degrees(),
            a.best.cost,
            a.rival.yaw.to_degrees(),
            a.rival.cost
        );
    }
    let pose = Pose::new(t0, position, level_attitude(best.yaw, cfg.roll_convention));
    Ok(InitResult { pose, yaw: best.yaw, cost: best.cost, used: usable.len(), starts, ambiguity })
}
