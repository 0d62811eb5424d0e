//! Analytic Jacobians of every factor against central differences at random
//! linearisation points.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uwbcal::factors::{
    AnchorHeightCost, AnchorPairCost, InitRangeCost, InterpolatedRangeCost, KnownPoseRangeCost, PosePriorCost, RangeCost,
    RelativePoseCost,
};
use uwbcal::solver::{check_jacobians, BlockValue, Residual};
use uwbcal::{Pose, Rotation};

pub const POINTS: usize = 100;
pub const TOLERANCE: f64 = 1e-5;

fn vec3(rng: &mut ChaCha8Rng, scale: f64) -> Vector3<f64> {
    Vector3::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale), rng.random_range(-scale..scale))
}

fn pose(rng: &mut ChaCha8Rng) -> Pose {
    // rotation angles up to just short of π exercise the large-angle branches
    let axis = vec3(rng, 1.0).normalize();
    let angle = rng.random_range(0.0..3.1);
    Pose::new(0.0, vec3(rng, 10.0), Rotation::exp(&(axis * angle)))
}

/// A point at least a metre from `from`, so ranges stay well defined.
fn far_point(rng: &mut ChaCha8Rng, from: &Vector3<f64>) -> Vector3<f64> {
    loop {
        let p = vec3(rng, 15.0);
        if (p - from).norm() > 1.0 {
            return p;
        }
    }
}

/// Worst error of one factor over [`POINTS`] seeded random cases.
fn worst(
    name: &'static str,
    mut case: impl FnMut(&mut ChaCha8Rng) -> (Box<dyn Residual>, Vec<BlockValue>),
) -> (&'static str, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(name.bytes().fold(17u64, |h, b| h.wrapping_mul(31).wrapping_add(u64::from(b))));
    let mut worst = 0.0f64;
    for i in 0..POINTS {
        let (residual, values) = case(&mut rng);
        let err = check_jacobians(residual.as_ref(), &values).unwrap_or_else(|e| panic!("{name} point {i}: {e}"));
        worst = worst.max(err);
    }
    (name, worst)
}

/// `(factor, worst relative error)` for every factor type.
pub fn factor_errors() -> Vec<(&'static str, f64)> {
    vec![
        worst("range", |rng| {
            let pose = pose(rng);
            let offset = vec3(rng, 0.5);
            let anchor = far_point(rng, &pose.transform_point(&offset));
            let cost = RangeCost { tag_offset: offset, d: rng.random_range(1.0..20.0) };
            (Box::new(cost), vec![BlockValue::Pose(pose), BlockValue::Point3(anchor), BlockValue::Scalar(rng.random_range(-0.3..0.3))])
        }),
        worst("known-pose range", |rng| {
            let pose = pose(rng);
            let offset = vec3(rng, 0.5);
            let anchor = far_point(rng, &pose.transform_point(&offset));
            let cost = KnownPoseRangeCost { pose, tag_offset: offset, d: rng.random_range(1.0..20.0) };
            (Box::new(cost), vec![BlockValue::Point3(anchor), BlockValue::Scalar(rng.random_range(-0.3..0.3))])
        }),
        worst("interpolated range", |rng| {
            let a = pose(rng);
            let step = Pose::new(0.0, vec3(rng, 0.5), Rotation::exp(&vec3(rng, 0.2)));
            let b = a.compose(&step);
            let offset = vec3(rng, 0.5);
            let anchor = far_point(rng, &a.p);
            let anchor = if (anchor - b.p).norm() > 2.0 { anchor } else { anchor + Vector3::new(5.0, 0.0, 0.0) };
            let cost = InterpolatedRangeCost { u: rng.random_range(0.0..1.0), tag_offset: offset, anchor, bias: 0.05, d: 7.0 };
            (Box::new(cost), vec![BlockValue::Pose(a), BlockValue::Pose(b)])
        }),
        worst("anchor-anchor", |rng| {
            let a = vec3(rng, 20.0);
            let b = far_point(rng, &a);
            (Box::new(AnchorPairCost { distance: rng.random_range(1.0..30.0) }), vec![BlockValue::Point3(a), BlockValue::Point3(b)])
        }),
        worst("anchor height", |rng| {
            let cost = AnchorHeightCost { height: rng.random_range(0.0..5.0), sigma: rng.random_range(0.01..0.5) };
            (Box::new(cost), vec![BlockValue::Point3(vec3(rng, 20.0))])
        }),
        worst("relative pose", |rng| {
            let a = pose(rng);
            let b = pose(rng);
            let delta = Pose::new(0.0, vec3(rng, 1.0), Rotation::exp(&vec3(rng, 0.3)));
            // keep the residual rotation away from π, where the log is singular
            let b = if a.between(&b).r.angle_to(&delta.r) < 2.5 { b } else { a.compose(&delta) };
            (Box::new(RelativePoseCost { delta }), vec![BlockValue::Pose(a), BlockValue::Pose(b)])
        }),
        worst("stationary start", |rng| {
            let p = vec3(rng, 5.0);
            let cost = InitRangeCost { tag_offset: vec3(rng, 0.5), anchor: far_point(rng, &p), d: rng.random_range(1.0..15.0) };
            (Box::new(cost), vec![BlockValue::Point3(p), BlockValue::Yaw(rng.random_range(-3.1..3.1))])
        }),
        worst("pose prior", |rng| {
            let prior = pose(rng);
            let near = prior.compose(&Pose::new(0.0, vec3(rng, 1.0), Rotation::exp(&vec3(rng, 0.8))));
            (Box::new(PosePriorCost { prior }), vec![BlockValue::Pose(near)])
        }),
    ]
}
