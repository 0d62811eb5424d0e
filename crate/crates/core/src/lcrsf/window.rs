//! Streaming sliding-window estimator.

use std::collections::{BTreeMap, VecDeque};
use std::time::Instant;

use nalgebra::{DMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::factors::{
    predicted_range, AnchorId, InterpolatedRangeCost, LinkBias, PosePriorCost, RangeMeasurement, RelativePoseCost,
    TagExtrinsics,
};
use crate::geometry::{interpolate_pose, Frame, Pose, Trajectory};
use crate::solver::{self, BlockId, BlockValue, Loss, Problem, SolveReport, Termination};

use super::{FusionConfig, FusionError};

/// `T̂_{k−1} ∘ (S_{k−1}⁻¹ ∘ S_k)`: carry the previous estimate forward by
/// the odometry increment.
pub fn predict_pose(prev_u: &Pose, prev_s: &Pose, new_s: &Pose) -> Pose {
    prev_u.compose(&prev_s.between(new_s)).at(new_s.t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeFate {
    Kept,
    /// Failed the prediction gate.
    Gated,
    /// No pose pair brackets the timestamp.
    Unbracketed,
    /// Tag or anchor unknown, or the range is not a positive finite number.
    Unusable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowTiming {
    pub index: usize,
    /// Timestamp of the newest pose in the window.
    pub t_end: f64,
    pub poses: usize,
    pub ranges: usize,
    pub iterations: usize,
    pub final_cost: f64,
    pub termination: Termination,
    pub wall_ms: f64,
}

/// A range assigned to the interval that starts at its node.
#[derive(Clone, Copy, Debug)]
struct Attached {
    u: f64,
    offset: Vector3<f64>,
    anchor: Vector3<f64>,
    bias: f64,
    d: f64,
}

#[derive(Clone, Debug)]
struct Node {
    odom: Pose,
    est: Pose,
    confirmed: bool,
    ranges: Vec<Attached>,
}

#[derive(Clone, Debug)]
struct Pending {
    seq: usize,
    m: RangeMeasurement,
}

/// Everything `finish` hands back.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionOutput {
    /// Confirmed poses in the anchor frame, one per odometry pose.
    pub trajectory: Trajectory,
    pub windows: Vec<WindowTiming>,
    pub reports: Vec<SolveReport>,
    /// Fate of every pushed range, in push order.
    pub range_fates: Vec<RangeFate>,
}

/// Online state: confirmed output, the active window and ranges that wait
/// for the pose after them.
pub struct FusionState {
    cfg: FusionConfig,
    anchors: BTreeMap<AnchorId, Vector3<f64>>,
    biases: LinkBias,
    extrinsics: TagExtrinsics,
    init: Pose,
    window: VecDeque<Node>,
    pending: Vec<Pending>,
    confirmed: Vec<Pose>,
    windows: Vec<WindowTiming>,
    reports: Vec<SolveReport>,
    fates: Vec<RangeFate>,
    sqrt_odom: DMatrix<f64>,
    sqrt_prior: DMatrix<f64>,
}

fn diag(values: [f64; 6]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&values))
}

impl FusionState {
    /// `init` is the anchor-frame pose of the first odometry sample.
    pub fn new(
        anchors: BTreeMap<AnchorId, Vector3<f64>>,
        biases: LinkBias,
        extrinsics: TagExtrinsics,
        init: Pose,
        cfg: FusionConfig,
    ) -> Result<Self, FusionError> {
        cfg.validate()?;
        let (r, t) = (1.0 / cfg.odom_sigma_rot, 1.0 / cfg.odom_sigma_trans);
        let sqrt_odom = diag([r, r, r, t, t, t]);
        let (r, t) = (1.0 / cfg.prior_sigma_rot_deg.to_radians(), 1.0 / cfg.prior_sigma_pos);
        let sqrt_prior = diag([r, r, r, t, t, t]);
        Ok(FusionState {
            cfg,
            anchors,
            biases,
            extrinsics,
            init,
            window: VecDeque::new(),
            pending: Vec::new(),
            confirmed: Vec::new(),
            windows: Vec::new(),
            reports: Vec::new(),
            fates: Vec::new(),
            sqrt_odom,
            sqrt_prior,
        })
    }

    pub fn confirmed(&self) -> &[Pose] {
        &self.confirmed
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    fn last_time(&self) -> Option<f64> {
        self.window.back().map(|n| n.odom.t)
    }

    /// Queue a range. It is gated once the first pose after it arrives.
    pub fn push_range(&mut self, m: RangeMeasurement) {
        let seq = self.fates.len();
        let usable = m.is_valid() && self.extrinsics.get(&m.tag).is_some() && self.anchors.contains_key(&m.anchor);
        self.fates.push(if usable { RangeFate::Unbracketed } else { RangeFate::Unusable });
        // ranges at or before the newest pose have missed their interval
        if usable && self.last_time().is_some_and(|t| m.t > t) {
            self.pending.push(Pending { seq, m });
        }
    }

    /// Ingest the next odometry pose; solves when the window is full.
    pub fn push_pose(&mut self, odom: Pose) -> Result<(), FusionError> {
        if let Some(t) = self.last_time() {
            if !(odom.t > t) {
                return Err(FusionError::NonIncreasing { t: odom.t, previous: t });
            }
        }
        let est = match self.window.back() {
            None => self.init.at(odom.t),
            Some(prev) => predict_pose(&prev.est, &prev.odom, &odom),
        };
        if let Some(prev) = self.window.back_mut() {
            let (t0, t1) = (prev.odom.t, odom.t);
            let (a, b) = (prev.est, est);
            let mut waiting = Vec::new();
            for p in self.pending.drain(..) {
                if p.m.t > t1 {
                    waiting.push(p);
                    continue;
                }
                let u = (p.m.t - t0) / (t1 - t0);
                let pose = interpolate_pose(&a, &b, u);
                let offset = *self.extrinsics.get(&p.m.tag).expect("checked on push");
                let anchor = self.anchors[&p.m.anchor];
                let bias = self.biases.get(&p.m.tag, &p.m.anchor);
                let predicted = predicted_range(&pose, &offset, &anchor);
                if ((p.m.d + bias) - predicted).abs() <= self.cfg.tau {
                    prev.ranges.push(Attached { u, offset, anchor, bias, d: p.m.d });
                    self.fates[p.seq] = RangeFate::Kept;
                } else {
                    self.fates[p.seq] = RangeFate::Gated;
                }
            }
            self.pending = waiting;
        }
        self.window.push_back(Node { odom, est, confirmed: false, ranges: Vec::new() });
        if self.window.len() >= self.cfg.window {
            self.process_window()?;
            self.slide(self.cfg.stride);
        }
        Ok(())
    }

    /// Optimise every pose in the window against odometry increments and
    /// the ranges attached to its intervals.
    pub fn process_window(&mut self) -> Result<SolveReport, FusionError> {
        let n = self.window.len();
        if n < 2 {
            return Err(FusionError::WindowUnderflow(n));
        }
        let started = Instant::now();
        let mut problem = Problem::new();
        let ids: Vec<BlockId> = self
            .window
            .iter()
            .map(|node| {
                if node.confirmed {
                    problem.add_constant_block(BlockValue::Pose(node.est))
                } else {
                    problem.add_block(BlockValue::Pose(node.est))
                }
            })
            .collect();
        if !self.window[0].confirmed {
            let prior = PosePriorCost { prior: self.init.at(self.window[0].odom.t) };
            problem.add_weighted_residual(prior, &ids[..1], Loss::None, self.sqrt_prior.clone());
        }
        let loss = Loss::Cauchy(self.cfg.cauchy_scale);
        let mut ranges = 0;
        for (k, pair) in ids.windows(2).enumerate() {
            let (a, b) = (&self.window[k], &self.window[k + 1]);
            let delta = a.odom.between(&b.odom);
            problem.add_weighted_residual(RelativePoseCost { delta }, pair, Loss::None, self.sqrt_odom.clone());
            for r in &a.ranges {
                let cost = InterpolatedRangeCost { u: r.u, tag_offset: r.offset, anchor: r.anchor, bias: r.bias, d: r.d };
                problem.add_residual(cost, pair, loss);
                ranges += 1;
            }
        }
        let report = solver::solve(&mut problem, &self.cfg.solver)?;
        for (node, id) in self.window.iter_mut().zip(&ids) {
            node.est = problem.value(*id).pose()?.at(node.odom.t);
        }
        let wall_ms = started.elapsed().as_secs_f64() * 1e3;
        log::debug!(
            "window {}: {n} poses, {ranges} ranges, {:?} after {} iterations in {wall_ms:.1} ms",
            self.windows.len(),
            report.termination,
            report.iterations
        );
        self.windows.push(WindowTiming {
            index: self.windows.len(),
            t_end: self.window[n - 1].odom.t,
            poses: n,
            ranges,
            iterations: report.iterations,
            final_cost: report.final_cost,
            termination: report.termination,
            wall_ms,
        });
        self.reports.push(report.clone());
        Ok(report)
    }

    /// Confirm the first `stride` nodes plus the new front, then drop the
    /// first `stride`. The new front stays in the window, frozen.
    fn slide(&mut self, stride: usize) {
        let stride = stride.min(self.window.len() - 1);
        for node in self.window.iter_mut().take(stride + 1) {
            if !node.confirmed {
                node.confirmed = true;
                self.confirmed.push(node.est);
            }
        }
        self.window.drain(..stride);
    }

    /// Solve whatever remains and confirm it.
    pub fn finish(mut self) -> Result<FusionOutput, FusionError> {
        if self.window.iter().any(|n| !n.confirmed) {
            if self.window.len() >= 2 {
                self.process_window()?;
            }
            let len = self.window.len();
            self.slide(len.saturating_sub(1));
        }
        let trajectory = Trajectory::new(self.confirmed, Frame::Anchor).map_err(|e| FusionError::Output(e.to_string()))?;
        Ok(FusionOutput { trajectory, windows: self.windows, reports: self.reports, range_fates: self.fates })
    }
}
