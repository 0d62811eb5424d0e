//! Two-stage anchor position calibration.
//!
//! Stage 1 fits anchor positions and per-link range biases to every range
//! that falls inside the SLAM trajectory span, under a Cauchy loss. Ranges
//! whose bias-corrected value disagrees with the Stage-1 prediction by more
//! than `tau` are dropped, and Stage 2 re-solves the same cost on the
//! survivors starting from the Stage-1 values. Anchors live in the frame of
//! the trajectory they were calibrated from.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::factors::{
    predicted_range, AnchorHeightCost, AnchorHeightPrior, AnchorId, AnchorPairCost, AnchorPairPrior,
    KnownPoseRangeCost, Link, LinkBias, RangeMeasurement, TagExtrinsics, TagId,
};
use crate::geometry::{Pose, Trajectory};
use crate::par::{self, Execution};
use crate::solver::{self, BlockId, BlockValue, Loss, Problem, SolveReport, SolverError, SolverOptions};

/// Measurements sampled per anchor by the trilateration initializer.
pub const TRILATERATION_SAMPLES: usize = 20;
/// Fewer usable ranges than this leaves an anchor unobservable in 3D.
pub const MIN_RANGES_PER_ANCHOR: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApcError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("trajectory needs at least 2 poses, got {0}")]
    TrajectoryTooShort(usize),
    #[error("no range measurement falls inside the trajectory span")]
    NoOverlap,
    #[error("anchor {anchor} has {count} usable ranges, need at least {MIN_RANGES_PER_ANCHOR}")]
    InsufficientData { anchor: AnchorId, count: usize },
    #[error("no extrinsics for tag {0}")]
    MissingExtrinsics(TagId),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// How Stage 1 seeds the anchor positions.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "anchors", rename_all = "lowercase")]
pub enum AnchorInit {
    Centroid,
    #[default]
    Trilaterate,
    /// Positions read from a file; anchors missing from the map fall back
    /// to trilateration.
    Given(BTreeMap<AnchorId, Vector3<f64>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ApcConfig {
    /// Gate threshold on |corrected − predicted| range, meters.
    pub tau: f64,
    /// Cauchy loss scale, meters.
    pub cauchy_scale: f64,
    pub init: AnchorInit,
    pub use_height_priors: bool,
    /// Links with fewer ranges than this keep their bias fixed at zero.
    pub min_bias_inliers: usize,
    /// Number of filter-and-resolve rounds after Stage 1.
    pub filter_rounds: usize,
    pub solver: SolverOptions,
}

impl Default for ApcConfig {
    fn default() -> Self {
        ApcConfig {
            tau: 0.5,
            cauchy_scale: 1.0,
            init: AnchorInit::default(),
            use_height_priors: false,
            min_bias_inliers: 50,
            filter_rounds: 1,
            solver: SolverOptions::default(),
        }
    }
}

impl ApcConfig {
    pub fn validate(&self) -> Result<(), ApcError> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(ApcError::InvalidConfig(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.cauchy_scale > 0.0 && self.cauchy_scale.is_finite()) {
            return Err(ApcError::InvalidConfig(format!("cauchy scale must be positive, got {}", self.cauchy_scale)));
        }
        if self.filter_rounds == 0 {
            return Err(ApcError::InvalidConfig("filter_rounds must be at least 1".into()));
        }
        Ok(())
    }
}

/// Optional geometric knowledge about the anchor layout.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AnchorPriors {
    pub pairs: Vec<AnchorPairPrior>,
    pub heights: Vec<AnchorHeightPrior>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    /// Corrected range farther than `tau` from the prediction.
    Threshold,
    /// Timestamp outside the trajectory span.
    OutOfSpan,
    /// Anchor without a provisional position.
    UnknownAnchor,
    /// Tag without extrinsics.
    UnknownTag,
    /// Non-finite or non-positive range.
    Invalid,
}

/// Gate outcome for one measurement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GateDecision {
    pub kept: bool,
    /// Range predicted from the interpolated pose, when one exists.
    pub predicted: Option<f64>,
    pub reason: Option<RejectReason>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FilterOutcome {
    pub inliers: Vec<RangeMeasurement>,
    pub rejected: Vec<(RangeMeasurement, RejectReason)>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkStats {
    pub inliers: usize,
    pub rejected: usize,
    /// RMS of inlier range residuals at the final estimate, meters.
    pub rms: f64,
    pub bias_estimated: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationResult {
    pub anchors: BTreeMap<AnchorId, Vector3<f64>>,
    pub biases: LinkBias,
    pub stats: BTreeMap<Link, LinkStats>,
    pub stage1: SolveReport,
    pub stage2: SolveReport,
    pub config: ApcConfig,
}

/// A measurement paired with the tag pose it was taken from.
struct Observation {
    index: usize,
    pose: Pose,
    offset: Vector3<f64>,
}

/// Gate each measurement against provisional anchors and biases.
///
/// Tag poses come from interpolating `traj`; the corrected range `d + b` is
/// kept iff it lies within `tau` of the predicted range.
pub fn gate(
    ranges: &[RangeMeasurement],
    anchors: &BTreeMap<AnchorId, Vector3<f64>>,
    biases: &LinkBias,
    traj: &Trajectory,
    extrinsics: &TagExtrinsics,
    tau: f64,
    exec: Execution,
) -> Vec<GateDecision> {
    par::map(ranges, exec, |m| {
        let reject = |reason| GateDecision { kept: false, predicted: None, reason: Some(reason) };
        if !m.is_valid() {
            return reject(RejectReason::Invalid);
        }
        let Some(offset) = extrinsics.get(&m.tag) else {
            return reject(RejectReason::UnknownTag);
        };
        let Some(anchor) = anchors.get(&m.anchor) else {
            return reject(RejectReason::UnknownAnchor);
        };
        let Ok(pose) = traj.interpolate(m.t) else {
            return reject(RejectReason::OutOfSpan);
        };
        let predicted = predicted_range(&pose, offset, anchor);
        let corrected = m.d + biases.get(&m.tag, &m.anchor);
        let kept = (corrected - predicted).abs() <= tau;
        GateDecision { kept, predicted: Some(predicted), reason: (!kept).then_some(RejectReason::Threshold) }
    })
}

/// Partition `ranges` into inliers and rejects. The partition is exhaustive
/// and preserves input order within each side.
pub fn filter_outliers(
    ranges: &[RangeMeasurement],
    anchors: &BTreeMap<AnchorId, Vector3<f64>>,
    biases: &LinkBias,
    traj: &Trajectory,
    extrinsics: &TagExtrinsics,
    tau: f64,
) -> FilterOutcome {
    let decisions = gate(ranges, anchors, biases, traj, extrinsics, tau, Execution::default());
    let mut out = FilterOutcome::default();
    for (m, d) in ranges.iter().zip(decisions) {
        match d.reason {
            None => out.inliers.push(m.clone()),
            Some(reason) => out.rejected.push((m.clone(), reason)),
        }
    }
    out
}

fn trajectory_centroid(traj: &Trajectory) -> Vector3<f64> {
    let sum: Vector3<f64> = traj.poses().iter().map(|p| p.p).sum();
    sum / traj.len().max(1) as f64
}

/// Centroid guess for the anchor at `index`: the trajectory centroid pushed
/// out by one meter along a direction that depends only on the index.
pub fn centroid_guess(traj: &Trajectory, index: usize) -> Vector3<f64> {
    let a = index as f64 * 2.399963229728653;
    trajectory_centroid(traj) + Vector3::new(a.cos(), a.sin(), 0.5)
}

/// Closed-form multilateration from tag positions and ranges, biases
/// ignored. `None` when the linear system is rank deficient.
pub fn trilaterate(points: &[Vector3<f64>], ranges: &[f64]) -> Option<Vector3<f64>> {
    let n = points.len();
    if n < MIN_RANGES_PER_ANCHOR || ranges.len() != n {
        return None;
    }
    // centering keeps ‖x‖² small relative to the ranges
    let mean: Vector3<f64> = points.iter().sum::<Vector3<f64>>() / n as f64;
    let mut a = DMatrix::zeros(n, 4);
    let mut b = DVector::zeros(n);
    for (i, (x, d)) in points.iter().zip(ranges).enumerate() {
        let c = x - mean;
        a[(i, 0)] = -2.0 * c.x;
        a[(i, 1)] = -2.0 * c.y;
        a[(i, 2)] = -2.0 * c.z;
        a[(i, 3)] = 1.0;
        b[i] = d * d - c.norm_squared();
    }
    // column scaling so the conditioning test is unit-independent
    let scale: Vec<f64> = (0..4).map(|j| a.column(j).amax().max(f64::MIN_POSITIVE)).collect();
    for (j, s) in scale.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / s);
    }
    let svd = a.svd(true, true);
    let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
    if !(smin > 1e-9 * smax) {
        return None;
    }
    let y = svd.solve(&b, 0.0).ok()?;
    let p = Vector3::new(y[0] / scale[0], y[1] / scale[1], y[2] / scale[2]) + mean;
    p.iter().all(|v| v.is_finite()).then_some(p)
}

fn observe(
    ranges: &[RangeMeasurement],
    traj: &Trajectory,
    extrinsics: &TagExtrinsics,
    exec: Execution,
) -> Result<Vec<Observation>, ApcError> {
    for m in ranges {
        if extrinsics.get(&m.tag).is_none() {
            return Err(ApcError::MissingExtrinsics(m.tag.clone()));
        }
    }
    let poses = par::map(ranges, exec, |m| if m.is_valid() { traj.interpolate(m.t).ok() } else { None });
    Ok(poses
        .into_iter()
        .enumerate()
        .filter_map(|(index, pose)| {
            let offset = *extrinsics.get(&ranges[index].tag)?;
            pose.map(|pose| Observation { index, pose, offset })
        })
        .collect())
}

/// Stage-1 seed for every anchor in `by_anchor` (observation indices per
/// anchor, in time order).
fn init_guesses(
    strategy: &AnchorInit,
    traj: &Trajectory,
    ranges: &[RangeMeasurement],
    obs: &[Observation],
    by_anchor: &BTreeMap<AnchorId, Vec<usize>>,
) -> BTreeMap<AnchorId, Vector3<f64>> {
    by_anchor
        .iter()
        .enumerate()
        .map(|(i, (id, idx))| {
            let tri = || {
                let step = (idx.len() as f64 / TRILATERATION_SAMPLES as f64).max(1.0);
                let picks: Vec<&Observation> = (0..TRILATERATION_SAMPLES.min(idx.len()))
                    .map(|k| &obs[idx[(k as f64 * step) as usize]])
                    .collect();
                let points: Vec<_> = picks.iter().map(|o| o.pose.transform_point(&o.offset)).collect();
                let d: Vec<_> = picks.iter().map(|o| ranges[o.index].d).collect();
                trilaterate(&points, &d).unwrap_or_else(|| {
                    log::warn!("anchor {id}: ill-conditioned trilateration, using centroid guess");
                    centroid_guess(traj, i)
                })
            };
            let guess = match strategy {
                AnchorInit::Centroid => centroid_guess(traj, i),
                AnchorInit::Trilaterate => tri(),
                AnchorInit::Given(map) => map.get(id).copied().unwrap_or_else(tri),
            };
            (id.clone(), guess)
        })
        .collect()
}

/// Anchor and bias blocks of a built calibration problem.
struct Blocks {
    anchors: BTreeMap<AnchorId, BlockId>,
    biases: BTreeMap<Link, (BlockId, bool)>,
}

#[allow(clippy::too_many_arguments)]
fn build_problem(
    ranges: &[RangeMeasurement],
    obs: &[Observation],
    anchors: &BTreeMap<AnchorId, Vector3<f64>>,
    biases: &LinkBias,
    priors: &AnchorPriors,
    cfg: &ApcConfig,
) -> (Problem, Blocks) {
    let mut problem = Problem::new();
    let anchor_blocks: BTreeMap<_, _> =
        anchors.iter().map(|(id, p)| (id.clone(), problem.add_block(BlockValue::Point3(*p)))).collect();

    let mut counts: BTreeMap<Link, usize> = BTreeMap::new();
    for o in obs {
        *counts.entry(ranges[o.index].link()).or_default() += 1;
    }
    let bias_blocks: BTreeMap<_, _> = counts
        .into_iter()
        .map(|(link, n)| {
            let estimated = n >= cfg.min_bias_inliers;
            let start = if estimated { biases.get(&link.tag, &link.anchor) } else { 0.0 };
            let block = if estimated {
                problem.add_block(BlockValue::Scalar(start))
            } else {
                problem.add_constant_block(BlockValue::Scalar(start))
            };
            (link, (block, estimated))
        })
        .collect();

    let loss = Loss::Cauchy(cfg.cauchy_scale);
    for o in obs {
        let m = &ranges[o.index];
        let Some(&anchor) = anchor_blocks.get(&m.anchor) else { continue };
        let (bias, _) = bias_blocks[&m.link()];
        problem.add_residual(KnownPoseRangeCost { pose: o.pose, tag_offset: o.offset, d: m.d }, &[anchor, bias], loss);
    }
    for prior in priors.pairs.iter().filter(|p| p.is_valid()) {
        if let (Some(&a), Some(&b)) = (anchor_blocks.get(&prior.a), anchor_blocks.get(&prior.b)) {
            problem.add_residual(AnchorPairCost { distance: prior.distance }, &[a, b], Loss::None);
        }
    }
    if cfg.use_height_priors {
        for prior in &priors.heights {
            if let Some(&a) = anchor_blocks.get(&prior.anchor) {
                problem.add_residual(AnchorHeightCost { height: prior.height, sigma: prior.sigma }, &[a], Loss::None);
            }
        }
    }
    (problem, Blocks { anchors: anchor_blocks, biases: bias_blocks })
}

fn read_back(problem: &Problem, blocks: &Blocks) -> (BTreeMap<AnchorId, Vector3<f64>>, LinkBias) {
    let anchors = blocks
        .anchors
        .iter()
        .map(|(id, &b)| (id.clone(), problem.value(b).point3().expect("anchor block is a point")))
        .collect();
    let mut biases = LinkBias::default();
    for (link, &(b, _)) in &blocks.biases {
        biases.set(link.clone(), problem.value(b).scalar().expect("bias block is a scalar"));
    }
    (anchors, biases)
}

/// Robust calibration cost of `anchors` and `biases` over the in-span
/// subset of `ranges`, plus any priors enabled by `cfg`.
pub fn calibration_cost(
    traj: &Trajectory,
    ranges: &[RangeMeasurement],
    extrinsics: &TagExtrinsics,
    priors: &AnchorPriors,
    anchors: &BTreeMap<AnchorId, Vector3<f64>>,
    biases: &LinkBias,
    cfg: &ApcConfig,
) -> Result<f64, ApcError> {
    let obs = observe(ranges, traj, extrinsics, cfg.solver.execution)?;
    // every link is evaluated at the supplied bias, estimated or not
    let cfg = ApcConfig { min_bias_inliers: 0, ..cfg.clone() };
    let (problem, _) = build_problem(ranges, &obs, anchors, biases, priors, &cfg);
    Ok(problem.cost()?)
}

/// Estimate anchor positions and link biases from one SLAM run.
pub fn calibrate(
    traj: &Trajectory,
    ranges: &[RangeMeasurement],
    extrinsics: &TagExtrinsics,
    priors: &AnchorPriors,
    cfg: &ApcConfig,
) -> Result<CalibrationResult, ApcError> {
    cfg.validate()?;
    if traj.len() < 2 {
        return Err(ApcError::TrajectoryTooShort(traj.len()));
    }
    let exec = cfg.solver.execution;
    let obs = observe(ranges, traj, extrinsics, exec)?;
    if obs.is_empty() {
        return Err(ApcError::NoOverlap);
    }
    let dropped = ranges.len() - obs.len();
    if dropped > 0 {
        log::info!("{dropped} of {} ranges fall outside the trajectory span or are invalid", ranges.len());
    }

    let mut by_anchor: BTreeMap<AnchorId, Vec<usize>> = BTreeMap::new();
    for (k, o) in obs.iter().enumerate() {
        by_anchor.entry(ranges[o.index].anchor.clone()).or_default().push(k);
    }
    if let Some((anchor, idx)) = by_anchor.iter().find(|(_, idx)| idx.len() < MIN_RANGES_PER_ANCHOR) {
        return Err(ApcError::InsufficientData { anchor: anchor.clone(), count: idx.len() });
    }

    let guesses = init_guesses(&cfg.init, traj, ranges, &obs, &by_anchor);
    let (mut problem, blocks) = build_problem(ranges, &obs, &guesses, &LinkBias::default(), priors, cfg);
    for (link, (_, estimated)) in &blocks.biases {
        if !estimated {
            log::warn!("link {link}: fewer than {} ranges, bias fixed at 0", cfg.min_bias_inliers);
        }
    }
    let stage1 = solver::solve(&mut problem, &cfg.solver)?;
    log::debug!("stage 1: {:?} after {} iterations, cost {}", stage1.termination, stage1.iterations, stage1.final_cost);
    let (mut anchors, mut biases) = read_back(&problem, &blocks);

    let mut stage2 = stage1.clone();
    let mut decisions = Vec::new();
    for round in 0..cfg.filter_rounds {
        decisions = gate(ranges, &anchors, &biases, traj, extrinsics, cfg.tau, exec);
        let inliers: Vec<Observation> = obs
            .iter()
            .filter(|o| decisions[o.index].kept)
            .map(|o| Observation { index: o.index, pose: o.pose, offset: o.offset })
            .collect();
        let observed: BTreeSet<&AnchorId> = inliers.iter().map(|o| &ranges[o.index].anchor).collect();
        let start: BTreeMap<_, _> = anchors.iter().filter(|(id, _)| observed.contains(id)).map(|(k, v)| (k.clone(), *v)).collect();
        for id in anchors.keys().filter(|id| !observed.contains(id)) {
            log::warn!("anchor {id}: no inlier ranges left after filtering, dropped");
        }
        let (mut p, b) = build_problem(ranges, &inliers, &start, &biases, priors, cfg);
        stage2 = solver::solve(&mut p, &cfg.solver)?;
        log::debug!(
            "stage 2 round {round}: {:?} after {} iterations, cost {}",
            stage2.termination,
            stage2.iterations,
            stage2.final_cost
        );
        (anchors, biases) = read_back(&p, &b);
    }

    let stats = link_stats(ranges, &decisions, &anchors, &biases, traj, extrinsics, cfg.min_bias_inliers);
    Ok(CalibrationResult { anchors, biases, stats, stage1, stage2, config: cfg.clone() })
}

fn link_stats(
    ranges: &[RangeMeasurement],
    decisions: &[GateDecision],
    anchors: &BTreeMap<AnchorId, Vector3<f64>>,
    biases: &LinkBias,
    traj: &Trajectory,
    extrinsics: &TagExtrinsics,
    min_bias_inliers: usize,
) -> BTreeMap<Link, LinkStats> {
    let mut stats: BTreeMap<Link, (LinkStats, f64)> = BTreeMap::new();
    for (m, d) in ranges.iter().zip(decisions) {
        let (s, sq) = stats.entry(m.link()).or_default();
        if !d.kept {
            s.rejected += 1;
            continue;
        }
        s.inliers += 1;
        let pose = traj.interpolate(m.t).expect("inliers are in span");
        let offset = extrinsics.get(&m.tag).expect("inliers have extrinsics");
        if let Some(anchor) = anchors.get(&m.anchor) {
            let e = predicted_range(&pose, offset, anchor) - (m.d + biases.get(&m.tag, &m.anchor));
            *sq += e * e;
        }
    }
    stats
        .into_iter()
        .map(|(link, (mut s, sq))| {
            s.rms = if s.inliers > 0 { (sq / s.inliers as f64).sqrt() } else { 0.0 };
            s.bias_estimated = s.inliers >= min_bias_inliers;
            (link, s)
        })
        .collect()
}
