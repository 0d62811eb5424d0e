//! Strategies and property checks shared by the proptest suite and the
//! acceptance run.

use std::f64::consts::PI;

use nalgebra::Vector3;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use uwbcal::dataio::{ate, Alignment};
use uwbcal::factors::{anchor_anchor_residual, predicted_range, relative_pose_residual};
use uwbcal::geometry::Frame;
use uwbcal::{Pose, Rotation, Trajectory};

pub const CASES: u32 = 1000;

pub fn vec3(scale: f64) -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(-scale..scale).prop_map(Vector3::from)
}

/// Rotations with angle below `max`.
pub fn rotation(max: f64) -> impl Strategy<Value = Rotation> {
    (vec3(1.0), 0.0..max).prop_filter_map("axis too short", |(axis, angle)| {
        (axis.norm() > 1e-3).then(|| Rotation::exp(&(axis.normalize() * angle)))
    })
}

pub fn pose() -> impl Strategy<Value = Pose> {
    (vec3(50.0), rotation(PI)).prop_map(|(p, r)| Pose::new(0.0, p, r))
}

pub fn trajectory() -> impl Strategy<Value = Trajectory> {
    prop::collection::vec((vec3(20.0), rotation(PI)), 12..40).prop_map(|v| {
        let poses = v.into_iter().enumerate().map(|(k, (p, r))| Pose::new(k as f64 * 0.1, p, r)).collect();
        Trajectory::new(poses, Frame::Anchor).unwrap()
    })
}

pub fn moved(traj: &Trajectory, g: &Pose) -> Trajectory {
    Trajectory::new(traj.poses().iter().map(|p| g.compose(p).at(p.t)).collect(), traj.frame()).unwrap()
}

type Check = Result<(), TestCaseError>;

pub fn relative_pose_left_invariance((ti, tj, delta, g): (Pose, Pose, Pose, Pose)) -> Check {
    let base = relative_pose_residual(&ti, &tj, &delta).residual;
    let shifted = relative_pose_residual(&g.compose(&ti), &g.compose(&tj), &delta).residual;
    prop_assert!((base - shifted).norm() < 1e-9 * (1.0 + base.norm()));
    Ok(())
}

pub fn range_rigid_invariance((t, offset, anchor, g): (Pose, Vector3<f64>, Vector3<f64>, Pose)) -> Check {
    let d = predicted_range(&t, &offset, &anchor);
    let moved = predicted_range(&g.compose(&t), &offset, &g.transform_point(&anchor));
    prop_assert!((d - moved).abs() < 1e-9 * (1.0 + d));
    Ok(())
}

pub fn log_exp_round_trip(r: Rotation) -> Check {
    prop_assert!(Rotation::exp(&r.log()).angle_to(&r) < 1e-10);
    let w = r.log();
    prop_assert!((Rotation::exp(&w).log() - w).norm() < 1e-9);
    Ok(())
}

pub fn slerp_bounds((a, b, u): (Rotation, Rotation, f64)) -> Check {
    prop_assert!(a.slerp(&b, 0.0).angle_to(&a) < 1e-9);
    prop_assert!(a.slerp(&b, 1.0).angle_to(&b) < 1e-9);
    let mid = a.slerp(&b, u);
    let total = a.angle_to(&b);
    prop_assert!((a.angle_to(&mid) - u * total).abs() < 1e-8);
    prop_assert!((mid.angle_to(&b) - (1.0 - u) * total).abs() < 1e-8);
    Ok(())
}

pub fn ate_rigid_invariance((est, gt, g): (Trajectory, Trajectory, Pose)) -> Check {
    let base = ate(&est, &gt, Alignment::None).unwrap().rmse;
    let both = ate(&moved(&est, &g), &moved(&gt, &g), Alignment::None).unwrap().rmse;
    prop_assert!((base - both).abs() < 1e-9 * (1.0 + base));
    prop_assert!(ate(&moved(&est, &g), &est, Alignment::Rigid).unwrap().rmse < 1e-7);
    let rigid = ate(&est, &gt, Alignment::Rigid).unwrap().rmse;
    let rigid_moved = ate(&moved(&est, &g), &gt, Alignment::Rigid).unwrap().rmse;
    prop_assert!((rigid - rigid_moved).abs() < 1e-9, "{} vs {}", rigid, rigid_moved);
    Ok(())
}

pub fn anchor_pair_symmetry((a, b, d): (Vector3<f64>, Vector3<f64>, f64)) -> Check {
    prop_assume!((a - b).norm() > 1e-3);
    let ab = anchor_anchor_residual(&a, &b, d).unwrap();
    let ba = anchor_anchor_residual(&b, &a, d).unwrap();
    prop_assert_eq!(ab.residual, ba.residual);
    prop_assert!((ab.d_a - ba.d_b).norm() < 1e-12 && (ab.d_a + ab.d_b).norm() < 1e-12);
    Ok(())
}

/// Run every invariance property for [`CASES`] cases; `(name, outcome)`.
pub fn invariance_suite() -> Vec<(&'static str, Result<(), String>)> {
    fn run<S: Strategy>(strategy: S, check: impl Fn(S::Value) -> Check) -> Result<(), String> {
        TestRunner::new(Config { cases: CASES, failure_persistence: None, ..Config::default() })
            .run(&strategy, check)
            .map_err(|e| e.to_string())
    }
    vec![
        ("relative-pose left invariance", run((pose(), pose(), pose(), pose()), relative_pose_left_invariance)),
        ("range rigid invariance", run((pose(), vec3(1.0), vec3(50.0), pose()), range_rigid_invariance)),
        ("log/exp round trip", run(rotation(PI - 1e-3), log_exp_round_trip)),
        ("slerp bounds", run((rotation(PI), rotation(PI), 0.0..1.0f64), slerp_bounds)),
        ("ATE rigid invariance", run((trajectory(), trajectory(), pose()), ate_rigid_invariance)),
        ("anchor-anchor symmetry", run((vec3(30.0), vec3(30.0), 0.1..60.0f64), anchor_pair_symmetry)),
    ]
}
