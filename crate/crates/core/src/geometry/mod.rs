//! Rotation and rigid-transform algebra, slerp, the SO(3) log map and
//! continuous-time pose interpolation.
//!
//! All values are immutable `Copy` types and every operation is a pure
//! function, so they can be shared freely between threads.

mod pose;
mod rotation;
mod trajectory;

use thiserror::Error;

pub use pose::{interpolate_with_jacobians, Pose};
pub use rotation::{hat, right_jacobian, right_jacobian_inv, Rotation};
pub use trajectory::{interpolate_pose, Frame, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("time {t} outside trajectory span [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },
    #[error("trajectory has {0} pose(s); interpolation needs at least 2")]
    TooShort(usize),
    #[error("timestamp {t} at index {index} is not strictly increasing")]
    NonIncreasing { index: usize, t: f64 },
    #[error("non-finite pose at index {index}")]
    NonFinite { index: usize },
}

/// Shortest-arc spherical interpolation, `u ∈ [0, 1]`.
pub fn slerp(r0: &Rotation, r1: &Rotation, u: f64) -> Rotation {
    r0.slerp(r1, u)
}

/// Axis-angle vector of `r` with angle in `[0, π]`.
pub fn so3_log_vee(r: &Rotation) -> nalgebra::Vector3<f64> {
    r.log()
}

pub fn so3_exp(omega: &nalgebra::Vector3<f64>) -> Rotation {
    Rotation::exp(omega)
}

pub fn compose(a: &Pose, b: &Pose) -> Pose {
    a.compose(b)
}

pub fn inverse(a: &Pose) -> Pose {
    a.inverse()
}

pub fn interpolate(traj: &Trajectory, t: f64) -> Result<Pose, GeometryError> {
    traj.interpolate(t)
}
