//! Sliding-window fusion of SLAM odometry with UWB ranges to calibrated
//! anchors.
//!
//! The first pose is fixed from ranges taken while stationary. Every later
//! odometry pose is predicted by carrying the previous estimate forward,
//! ranges in between are gated against the interpolated prediction, and
//! whenever the window holds `window` poses they are jointly optimised
//! against odometry increments and the surviving ranges. The oldest `stride`
//! poses then leave the window and become final.

mod init;
mod window;

use std::collections::BTreeMap;
use std::sync::mpsc;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::factors::{AnchorId, LinkBias, RangeMeasurement, TagExtrinsics};
use crate::geometry::Trajectory;
use crate::solver::{SolverError, SolverOptions};

pub use init::{initialize, Ambiguity, InitResult, InitStart};
pub use window::{predict_pose, FusionOutput, FusionState, RangeFate, WindowTiming};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("initialization needs at least 4 ranges to 2 anchors, got {ranges} ranges to {anchors}")]
    InsufficientInit { ranges: usize, anchors: usize },
    #[error("window holds {0} poses, need at least 2")]
    WindowUnderflow(usize),
    #[error("odometry time {t} does not follow {previous}")]
    NonIncreasing { t: f64, previous: f64 },
    #[error("empty odometry stream")]
    NoOdometry,
    #[error("output trajectory: {0}")]
    Output(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

impl From<crate::factors::FactorError> for FusionError {
    fn from(e: crate::factors::FactorError) -> Self {
        FusionError::Solver(SolverError::NumericalFailure(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    /// Poses per window.
    pub window: usize,
    /// Poses confirmed and dropped after each solve.
    pub stride: usize,
    /// Gate threshold, meters.
    pub tau: f64,
    /// Cauchy scale on range residuals, meters.
    pub cauchy_scale: f64,
    /// Odometry increment noise: rotation (rad) and translation (m).
    pub odom_sigma_rot: f64,
    pub odom_sigma_trans: f64,
    /// Length of the stationary start used for initialization, seconds.
    pub stationary: f64,
    /// Fixed body roll at start-up, radians.
    pub roll_convention: f64,
    pub yaw_starts: usize,
    /// Soft prior holding the first window to the initial pose.
    pub prior_sigma_pos: f64,
    pub prior_sigma_rot_deg: f64,
    pub solver: SolverOptions,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            window: 50,
            stride: 10,
            tau: 0.5,
            cauchy_scale: 0.5,
            odom_sigma_rot: 0.01,
            odom_sigma_trans: 0.01,
            stationary: 5.0,
            roll_convention: std::f64::consts::PI,
            yaw_starts: 8,
            prior_sigma_pos: 0.1,
            prior_sigma_rot_deg: 2.0,
            solver: SolverOptions { max_iters: 20, ..SolverOptions::default() },
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), FusionError> {
        let bad = |msg: String| Err(FusionError::InvalidConfig(msg));
        if self.window < 2 {
            return bad(format!("window must hold at least 2 poses, got {}", self.window));
        }
        if !(1..=self.window).contains(&self.stride) {
            return bad(format!("stride must lie in 1..={}, got {}", self.window, self.stride));
        }
        let positive = [
            ("tau", self.tau),
            ("cauchy_scale", self.cauchy_scale),
            ("odom_sigma_rot", self.odom_sigma_rot),
            ("odom_sigma_trans", self.odom_sigma_trans),
            ("stationary", self.stationary),
            ("prior_sigma_pos", self.prior_sigma_pos),
            ("prior_sigma_rot_deg", self.prior_sigma_rot_deg),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return bad(format!("{name} must be positive, got {v}"));
        }
        if self.yaw_starts == 0 {
            return bad("yaw_starts must be at least 1".into());
        }
        Ok(())
    }
}

/// Merged input stream event.
enum Event {
    Pose(crate::geometry::Pose),
    Range(RangeMeasurement),
}

/// Bound on events buffered between the reader and the estimator.
const QUEUE_DEPTH: usize = 1024;

#[derive(Clone, Debug, PartialEq)]
pub struct FusionRun {
    pub init: InitResult,
    pub output: FusionOutput,
}

impl FusionRun {
    pub fn trajectory(&self) -> &Trajectory {
        &self.output.trajectory
    }
}

/// Initialise from the stationary prefix, then stream odometry and ranges
/// through a [`FusionState`] in time order.
///
/// A reader thread merges the two streams into a bounded queue; ranges are
/// delivered before a pose with the same timestamp.
pub fn run_fusion(
    odometry: &Trajectory,
    ranges: &[RangeMeasurement],
    anchors: &BTreeMap<AnchorId, Vector3<f64>>,
    biases: &LinkBias,
    extrinsics: &TagExtrinsics,
    cfg: &FusionConfig,
) -> Result<FusionRun, FusionError> {
    cfg.validate()?;
    let t0 = odometry.start_time().ok_or(FusionError::NoOdometry)?;
    let stationary: Vec<RangeMeasurement> =
        ranges.iter().filter(|m| m.t >= t0 && m.t <= t0 + cfg.stationary).cloned().collect();
    let init = initialize(t0, &stationary, anchors, biases, extrinsics, cfg)?;

    let mut state = FusionState::new(anchors.clone(), biases.clone(), extrinsics.clone(), init.pose, cfg.clone())?;
    let poses = odometry.poses();
    let (tx, rx) = mpsc::sync_channel(QUEUE_DEPTH);
    let output = std::thread::scope(|scope| {
        scope.spawn(move || {
            let (mut i, mut j) = (0, 0);
            while i < poses.len() || j < ranges.len() {
                let range_first = j < ranges.len() && (i == poses.len() || ranges[j].t <= poses[i].t);
                let event = if range_first {
                    j += 1;
                    Event::Range(ranges[j - 1].clone())
                } else {
                    i += 1;
                    Event::Pose(poses[i - 1])
                };
                if tx.send(event).is_err() {
                    break; // estimator bailed out
                }
            }
        });
        for event in rx {
            match event {
                Event::Range(m) => state.push_range(m),
                Event::Pose(p) => state.push_pose(p)?,
            }
        }
        state.finish()
    })?;
    Ok(FusionRun { init, output })
}
