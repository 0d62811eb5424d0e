//! `t x y z qx qy qz qw` text trajectories.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use crate::geometry::{Frame, Pose, Rotation, Trajectory};

use super::{read_text, write_atomic, DataError};

/// Largest accepted deviation of a quaternion norm from 1.
const QUAT_NORM_TOL: f64 = 1e-3;

pub fn parse_trajectory(path: &Path, frame: Frame) -> Result<Trajectory, DataError> {
    parse_trajectory_str(&read_text(path)?, path, frame)
}

/// Parse trajectory text; `path` only labels errors.
pub fn parse_trajectory_str(text: &str, path: &Path, frame: Frame) -> Result<Trajectory, DataError> {
    let mut rows: Vec<(usize, Pose)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(DataError::parse(path, line, format!("expected 8 fields, found {}", fields.len())));
        }
        let mut v = [0.0; 8];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f.parse::<f64>().map_err(|_| DataError::parse(path, line, format!("not a number: {f}")))?;
            if !slot.is_finite() {
                return Err(DataError::parse(path, line, format!("non-finite value: {f}")));
            }
        }
        let [t, x, y, z, qx, qy, qz, qw] = v;
        let norm = (qx * qx + qy * qy + qz * qz + qw * qw).sqrt();
        if (norm - 1.0).abs() > QUAT_NORM_TOL {
            return Err(DataError::parse(path, line, format!("quaternion norm {norm} is not 1")));
        }
        let r = Rotation::from_wxyz(qw, qx, qy, qz).expect("norm checked above");
        rows.push((line, Pose::new(t, Vector3::new(x, y, z), r)));
    }
    rows.sort_by(|a, b| a.1.t.total_cmp(&b.1.t));
    if let Some(w) = rows.windows(2).find(|w| w[0].1.t == w[1].1.t) {
        return Err(DataError::DuplicateTimestamp { path: path.to_owned(), line: w[1].0, t: w[1].1.t });
    }
    let poses = rows.into_iter().map(|(_, p)| p).collect();
    Trajectory::new(poses, frame).map_err(|e| DataError::parse(path, 0, e.to_string()))
}

pub fn format_trajectory(traj: &Trajectory) -> String {
    let mut out = String::from("# t x y z qx qy qz qw\n");
    for p in traj.poses() {
        let [w, x, y, z] = p.r.wxyz();
        writeln!(out, "{} {} {} {} {} {} {} {}", p.t, p.p.x, p.p.y, p.p.z, x, y, z, w).expect("string write");
    }
    out
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<(), DataError> {
    write_atomic(path, format_trajectory(traj).as_bytes())
}
