//! Anchor self-calibration for UWB networks from a SLAM trajectory, and
//! sliding-window fusion of later SLAM runs into the anchor frame.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: rotations, poses, slerp and trajectory interpolation.
//! - [`solver`]: Levenberg–Marquardt over typed parameter blocks.
//! - [`factors`]: range, anchor-pair, height, relative-pose and start-up residuals.
//! - [`apc`]: two-stage robust anchor position and link-bias calibration.
//! - [`lcrsf`]: stationary initialisation and sliding-window range/odometry fusion.
//! - [`simgen`]: deterministic synthetic scenes with labelled outliers.
//! - [`dataio`]: file formats and trajectory error evaluation.

pub mod apc;
pub mod dataio;
pub mod factors;
pub mod geometry;
pub mod lcrsf;
pub mod par;
pub mod simgen;
pub mod solver;

pub use factors::{AnchorId, Link, LinkBias, RangeMeasurement, TagExtrinsics, TagId};
pub use geometry::{Pose, Rotation, Trajectory};
