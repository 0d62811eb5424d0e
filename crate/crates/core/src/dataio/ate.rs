//! Absolute trajectory error against ground truth.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Trajectory;

/// Largest timestamp gap for an estimate/ground-truth pair, seconds.
pub const ASSOCIATION_WINDOW: f64 = 0.02;
/// Fewest associated pairs an ATE is computed from.
pub const MIN_PAIRS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AteError {
    #[error("estimate and ground truth do not overlap in time")]
    NoOverlap,
    #[error("only {0} poses associate with ground truth, need {MIN_PAIRS}")]
    TooFewPairs(usize),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Alignment {
    /// Compare positions as given.
    #[default]
    None,
    /// Best rotation and translation of the estimate onto ground truth.
    Rigid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AteReport {
    pub rmse: f64,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
    pub alignment: Alignment,
    /// `(t, position error)` for every associated estimate pose.
    pub errors: Vec<(f64, f64)>,
}

/// Least-squares `(R, t)` minimising `Σ‖R·src + t − dst‖²` (Kabsch, with
/// the reflection case folded back to a proper rotation).
pub fn rigid_align(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> (Matrix3<f64>, Vector3<f64>) {
    assert_eq!(src.len(), dst.len());
    let n = src.len().max(1) as f64;
    let cs = src.iter().sum::<Vector3<f64>>() / n;
    let cd = dst.iter().sum::<Vector3<f64>>() / n;
    let h: Matrix3<f64> = src.iter().zip(dst).map(|(s, d)| (s - cs) * (d - cd).transpose()).sum();
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    (r, cd - r * cs)
}

/// Associate each estimate pose with the nearest ground-truth pose and
/// summarise the position errors.
pub fn ate(estimate: &Trajectory, truth: &Trajectory, alignment: Alignment) -> Result<AteReport, AteError> {
    let (Some(e0), Some(e1), Some(g0), Some(g1)) =
        (estimate.start_time(), estimate.end_time(), truth.start_time(), truth.end_time())
    else {
        return Err(AteError::NoOverlap);
    };
    if e1 < g0 - ASSOCIATION_WINDOW || g1 < e0 - ASSOCIATION_WINDOW {
        return Err(AteError::NoOverlap);
    }
    let gt = truth.poses();
    let mut times = Vec::new();
    let mut est = Vec::new();
    let mut ref_ = Vec::new();
    for p in estimate.poses() {
        let k = gt.partition_point(|g| g.t < p.t);
        let nearest = [k.checked_sub(1), (k < gt.len()).then_some(k)]
            .into_iter()
            .flatten()
            .min_by(|&a, &b| (gt[a].t - p.t).abs().total_cmp(&(gt[b].t - p.t).abs()));
        if let Some(j) = nearest.filter(|&j| (gt[j].t - p.t).abs() <= ASSOCIATION_WINDOW) {
            times.push(p.t);
            est.push(p.p);
            ref_.push(gt[j].p);
        }
    }
    if est.len() < MIN_PAIRS {
        return Err(AteError::TooFewPairs(est.len()));
    }
    if alignment == Alignment::Rigid {
        let (r, t) = rigid_align(&est, &ref_);
        est.iter_mut().for_each(|p| *p = r * *p + t);
    }
    let errors: Vec<(f64, f64)> = times.iter().zip(est.iter().zip(&ref_)).map(|(&t, (e, g))| (t, (e - g).norm())).collect();
    let n = errors.len() as f64;
    let mut sorted: Vec<f64> = errors.iter().map(|e| e.1).collect();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len().is_multiple_of(2) { 0.5 * (sorted[mid - 1] + sorted[mid]) } else { sorted[mid] };
    Ok(AteReport {
        rmse: (sorted.iter().map(|e| e * e).sum::<f64>() / n).sqrt(),
        mean: sorted.iter().sum::<f64>() / n,
        median,
        max: *sorted.last().expect("at least MIN_PAIRS"),
        alignment,
        errors,
    })
}
