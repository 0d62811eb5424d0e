//! Stationary-start fixtures and an exhaustive yaw search to check
//! initialisation against.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Vector3};
use uwbcal::factors::{level_attitude, predicted_range};
use uwbcal::lcrsf::{initialize, FusionConfig};
use uwbcal::solver::wrap_angle;
use uwbcal::{AnchorId, LinkBias, Pose, RangeMeasurement, TagExtrinsics};

/// Grid step of the exhaustive search, degrees.
pub const ORACLE_STEP_DEG: f64 = 0.01;

pub fn anchors() -> BTreeMap<AnchorId, Vector3<f64>> {
    [("100", [-8.0, -6.0, 0.4]), ("101", [9.0, -5.0, 3.1]), ("102", [7.5, 6.5, 1.2]), ("103", [-7.0, 5.0, 2.6]), ("104", [0.5, 9.0, 3.8])]
        .into_iter()
        .map(|(id, p)| (AnchorId::from(id), Vector3::from(p)))
        .collect()
}

pub fn extrinsics() -> TagExtrinsics {
    let mut ext = TagExtrinsics::new();
    ext.insert("200A", Vector3::new(0.4, 0.05, 0.0));
    ext.insert("201A", Vector3::new(-0.4, -0.05, 0.1));
    ext
}

pub fn exact_ranges(pose: &Pose, ext: &TagExtrinsics) -> Vec<RangeMeasurement> {
    let mut out = Vec::new();
    for (tag, o) in ext.iter() {
        for (id, a) in anchors() {
            out.push(RangeMeasurement::new(0.0, tag.as_str(), id.as_str(), predicted_range(pose, o, &a)));
        }
    }
    out
}

/// Exhaustive yaw search: for each candidate yaw the tag positions are
/// anchor-centred spheres around the body origin, so the position follows
/// from the linearised (differenced) sphere equations in closed form.
pub fn grid_search_yaw(ranges: &[RangeMeasurement], ext: &TagExtrinsics, roll: f64, step_deg: f64) -> f64 {
    let anchors = anchors();
    let steps = (360.0 / step_deg).round() as usize;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..steps {
        let yaw = wrap_angle((-180.0 + i as f64 * step_deg).to_radians());
        let r = level_attitude(yaw, roll);
        let centres: Vec<(Vector3<f64>, f64)> = ranges
            .iter()
            .map(|m| (anchors[&m.anchor] - r.rotate(ext.get(&m.tag).unwrap()), m.d))
            .collect();
        let (q0, d0) = centres[0];
        let rows = centres.len() - 1;
        let a = DMatrix::from_fn(rows, 3, |k, j| 2.0 * (centres[k + 1].0[j] - q0[j]));
        let b = DVector::from_fn(rows, |k, _| {
            let (q, d) = centres[k + 1];
            q.norm_squared() - q0.norm_squared() - d * d + d0 * d0
        });
        let x = a.svd(true, true).solve(&b, 1e-12).unwrap();
        let p = Vector3::new(x[0], x[1], x[2]);
        let cost: f64 = centres.iter().map(|(q, d)| ((p - q).norm() - d).powi(2)).sum();
        if cost < best.0 {
            best = (cost, yaw);
        }
    }
    best.1
}

/// One noiseless two-tag start checked against the oracle.
pub struct YawCase {
    pub truth_deg: f64,
    pub init_deg: f64,
    pub oracle_deg: f64,
    pub position_error: f64,
    pub ambiguous: bool,
}

impl YawCase {
    pub fn yaw_error_deg(&self) -> f64 {
        wrap_angle((self.init_deg - self.oracle_deg).to_radians()).abs().to_degrees()
    }
}

pub fn yaw_cases() -> Vec<YawCase> {
    let ext = extrinsics();
    let cfg = FusionConfig::default();
    [-170.0, -95.5, -12.25, 0.0, 30.0, 77.7, 144.4, 179.0]
        .into_iter()
        .enumerate()
        .map(|(k, truth_deg)| {
            let p = Vector3::new(-2.0 + k as f64, 1.5 - 0.5 * k as f64, 0.3);
            let truth = Pose::new(0.0, p, level_attitude(f64::to_radians(truth_deg), cfg.roll_convention));
            let ranges = exact_ranges(&truth, &ext);
            let oracle = grid_search_yaw(&ranges, &ext, cfg.roll_convention, ORACLE_STEP_DEG);
            let res = initialize(0.0, &ranges, &anchors(), &LinkBias::default(), &ext, &cfg).unwrap();
            YawCase {
                truth_deg,
                init_deg: res.yaw.to_degrees(),
                oracle_deg: oracle.to_degrees(),
                position_error: (res.pose.p - p).norm(),
                ambiguous: res.ambiguity.is_some(),
            }
        })
        .collect()
}

/// Start with both tags at the body origin: yaw is unobservable.
pub fn collocated_start_is_flagged() -> bool {
    let mut ext = TagExtrinsics::new();
    ext.insert("200A", Vector3::zeros());
    ext.insert("201A", Vector3::zeros());
    let cfg = FusionConfig::default();
    let truth = Pose::new(0.0, Vector3::new(1.0, -1.0, 0.5), level_attitude(0.8, cfg.roll_convention));
    let res = initialize(0.0, &exact_ranges(&truth, &ext), &anchors(), &LinkBias::default(), &ext, &cfg).unwrap();
    res.ambiguity.is_some() && (res.pose.p - truth.p).norm() < 1e-6
}
