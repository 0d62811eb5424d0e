//! Platform position profiles inside an axis-aligned volume.

use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Volume;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    #[default]
    Figure8,
    Lawnmower,
    RandomWaypoint,
}

/// Position as a function of time since motion started.
pub(crate) enum Path {
    Figure8 { center: Vector3<f64>, amp: Vector3<f64>, omega: f64, sign: f64 },
    Polyline { points: Vec<Vector3<f64>>, speed: f64 },
}

impl Path {
    pub(crate) fn sample<R: Rng>(kind: TrajectoryKind, vol: &Volume, speed: f64, length: f64, rng: &mut R) -> Path {
        let size = vol.size();
        let lo = vol.min + 0.25 * size;
        let hi = vol.max - 0.25 * size;
        // platform moves in a slab above the floor, away from the ceiling anchors
        let z_mid = vol.min.z + 0.3 * size.z;
        let z_amp = (0.12 * size.z).min(1.0);
        match kind {
            TrajectoryKind::Figure8 => {
                let jitter = Vector3::new(rng.random_range(-0.03..0.03) * size.x, rng.random_range(-0.03..0.03) * size.y, 0.0);
                let center = vol.center().xy().push(z_mid) + jitter;
                let scale = rng.random_range(0.8..1.0);
                let amp = Vector3::new(0.35 * size.x * scale, 0.35 * size.y * scale, z_amp);
                // rough loop length of the (sin w, sin 2w) curve
                let loop_len = 4.0 * amp.x + 6.0 * amp.y;
                let omega = std::f64::consts::TAU * speed / loop_len;
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                Path::Figure8 { center, amp, omega, sign }
            }
            TrajectoryKind::Lawnmower => {
                let rows = 4;
                let (x0, x1) = if rng.random_bool(0.5) { (lo.x, hi.x) } else { (hi.x, lo.x) };
                let (y0, y1) = if rng.random_bool(0.5) { (lo.y, hi.y) } else { (hi.y, lo.y) };
                let mut pass: Vec<Vector3<f64>> = Vec::new();
                for r in 0..rows {
                    let y = y0 + (y1 - y0) * r as f64 / (rows - 1) as f64;
                    let z = z_mid + if r % 2 == 0 { -0.5 } else { 0.5 } * z_amp;
                    let (a, b) = if r % 2 == 0 { (x0, x1) } else { (x1, x0) };
                    pass.push(Vector3::new(a, y, z));
                    pass.push(Vector3::new(b, y, z));
                }
                let mut points = pass.clone();
                while polyline_length(&points) < length {
                    let back: Vec<_> = points.iter().rev().skip(1).take(pass.len() - 1).copied().collect();
                    points.extend(back);
                }
                Path::Polyline { points, speed }
            }
            TrajectoryKind::RandomWaypoint => {
                let draw = |rng: &mut R| {
                    Vector3::new(
                        rng.random_range(lo.x..hi.x),
                        rng.random_range(lo.y..hi.y),
                        rng.random_range(z_mid - z_amp..z_mid + z_amp),
                    )
                };
                let mut points = vec![draw(rng)];
                while polyline_length(&points) < length {
                    let next = draw(rng);
                    if (next - points[points.len() - 1]).norm() > 0.1 * size.x.min(size.y) {
                        points.push(next);
                    }
                }
                Path::Polyline { points, speed }
            }
        }
    }

    pub(crate) fn position(&self, tau: f64) -> Vector3<f64> {
        match self {
            Path::Figure8 { center, amp, omega, sign } => {
                let w = omega * tau;
                center + Vector3::new(amp.x * w.sin(), sign * amp.y * (2.0 * w).sin(), amp.z * (0.7 * w).sin())
            }
            Path::Polyline { points, speed } => {
                let mut s = speed * tau;
                for seg in points.windows(2) {
                    let len = (seg[1] - seg[0]).norm();
                    if s <= len {
                        return seg[0] + (seg[1] - seg[0]) * (s / len);
                    }
                    s -= len;
                }
                points[points.len() - 1]
            }
        }
    }

    /// Upper bound on speed, m/s.
    pub(crate) fn max_speed(&self) -> f64 {
        match self {
            Path::Figure8 { amp, omega, .. } => omega * (amp.x + 2.0 * amp.y + 0.7 * amp.z),
            Path::Polyline { speed, .. } => *speed,
        }
    }
}

fn polyline_length(points: &[Vector3<f64>]) -> f64 {
    points.windows(2).map(|s| (s[1] - s[0]).norm()).sum()
}
