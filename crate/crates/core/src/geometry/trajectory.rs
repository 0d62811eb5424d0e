use serde::{Deserialize, Serialize};

use super::pose::Pose;
use super::GeometryError;

/// Reference frame a trajectory is expressed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    /// Per-run SLAM odometry frame.
    Slam,
    /// Persistent anchor-referenced frame.
    Anchor,
}

/// Time-sorted pose sequence with strictly increasing timestamps.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    poses: Vec<Pose>,
    frame: Frame,
}

impl Trajectory {
    pub fn new(poses: Vec<Pose>, frame: Frame) -> Result<Self, GeometryError> {
        for (i, p) in poses.iter().enumerate() {
            if !p.is_finite() {
                return Err(GeometryError::NonFinite { index: i });
            }
            if i > 0 && p.t <= poses[i - 1].t {
                return Err(GeometryError::NonIncreasing { index: i, t: p.t });
            }
        }
        Ok(Trajectory { poses, frame })
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn into_poses(self) -> Vec<Pose> {
        self.poses
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn start_time(&self) -> Option<f64> {
        self.poses.first().map(|p| p.t)
    }

    pub fn end_time(&self) -> Option<f64> {
        self.poses.last().map(|p| p.t)
    }

    pub fn contains_time(&self, t: f64) -> bool {
        match (self.start_time(), self.end_time()) {
            (Some(a), Some(b)) => t >= a && t <= b,
            _ => false,
        }
    }

    /// Index `k` and weight `u` such that `t_k <= t <= t_{k+1}` and
    /// `t = t_k + u·(t_{k+1} − t_k)`.
    pub fn bracket(&self, t: f64) -> Result<(usize, f64), GeometryError> {
        if self.poses.len() < 2 {
            return Err(GeometryError::TooShort(self.poses.len()));
        }
        let (start, end) = (self.poses[0].t, self.poses[self.poses.len() - 1].t);
        if !(t >= start && t <= end) {
            return Err(GeometryError::OutOfRange { t, start, end });
        }
        // first index with pose.t > t, clamped so that k+1 stays valid
        let upper = self.poses.partition_point(|p| p.t <= t);
        let k = upper.saturating_sub(1).min(self.poses.len() - 2);
        let (a, b) = (&self.poses[k], &self.poses[k + 1]);
        Ok((k, (t - a.t) / (b.t - a.t)))
    }

    /// Pose at time `t`: translation mixed linearly, rotation slerped.
    pub fn interpolate(&self, t: f64) -> Result<Pose, GeometryError> {
        let (k, u) = self.bracket(t)?;
        Ok(interpolate_pose(&self.poses[k], &self.poses[k + 1], u).at(t))
    }
}

pub fn interpolate_pose(a: &Pose, b: &Pose, u: f64) -> Pose {
    Pose {
        t: (1.0 - u) * a.t + u * b.t,
        p: (1.0 - u) * a.p + u * b.p,
        r: a.r.slerp(&b.r, u),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rotation;
    use nalgebra::Vector3;

    fn two(p1: Vector3<f64>, r1: Rotation) -> Trajectory {
        Trajectory::new(
            vec![Pose::new(0.0, Vector3::zeros(), Rotation::identity()), Pose::new(1.0, p1, r1)],
            Frame::Slam,
        )
        .unwrap()
    }

    #[test]
    fn linear_mix() {
        let tr = two(Vector3::new(2.0, 0.0, 0.0), Rotation::identity());
        let p = tr.interpolate(0.25).unwrap();
        assert!((p.p - Vector3::new(0.5, 0.0, 0.0)).norm() < 1e-15);
        assert_eq!(p.t, 0.25);
    }

    #[test]
    fn exact_at_knots() {
        let poses: Vec<_> = (0..5)
            .map(|i| Pose::new(i as f64 * 0.1, Vector3::new(i as f64, 1.0, 0.0), Rotation::rot_z(i as f64 * 0.2)))
            .collect();
        let tr = Trajectory::new(poses.clone(), Frame::Slam).unwrap();
        for p in &poses {
            let q = tr.interpolate(p.t).unwrap();
            assert!((q.p - p.p).norm() < 1e-15);
            assert!(q.r.angle_to(&p.r) < 1e-15);
        }
    }

    #[test]
    fn out_of_range_and_validation() {
        let tr = two(Vector3::new(1.0, 0.0, 0.0), Rotation::identity());
        assert!(matches!(tr.interpolate(-0.1), Err(GeometryError::OutOfRange { .. })));
        assert!(matches!(tr.interpolate(1.0001), Err(GeometryError::OutOfRange { .. })));
        assert!(matches!(tr.interpolate(f64::NAN), Err(GeometryError::OutOfRange { .. })));
        let dup = vec![Pose::identity(), Pose::identity()];
        assert!(matches!(Trajectory::new(dup, Frame::Slam), Err(GeometryError::NonIncreasing { index: 1, .. })));
        let single = Trajectory::new(vec![Pose::identity()], Frame::Slam).unwrap();
        assert!(matches!(single.interpolate(0.0), Err(GeometryError::TooShort(1))));
    }
}
