//! Scenario suite and helpers shared by the integration and acceptance
//! tests.
#![allow(dead_code)]

pub mod init_oracle;
pub mod jacobians;
pub mod props;

use uwbcal::apc::{calibrate, AnchorPriors, ApcConfig, CalibrationResult};
use uwbcal::dataio::{ate, Alignment};
use uwbcal::geometry::Frame;
use uwbcal::lcrsf::{run_fusion, FusionConfig, FusionRun};
use uwbcal::simgen::{generate, ScenarioConfig, ScenarioTruth, SequenceTruth, TrajectoryKind, Volume};
use uwbcal::Trajectory;

/// Calibration run length, seconds.
pub const CALIBRATION_DURATION: f64 = 120.0;
/// Length of each fusion run, seconds.
pub const FUSION_DURATION: f64 = 600.0;

/// Error of the surveyed anchor heights, meters.
pub const HEIGHT_PRIOR_SIGMA: f64 = 0.1;

/// Six scene layouts of increasing size; the last is a sparse hall.
pub fn scenario_suite() -> Vec<(&'static str, ScenarioConfig)> {
    let base = ScenarioConfig {
        sequences: 3,
        duration: FUSION_DURATION,
        durations: vec![CALIBRATION_DURATION],
        height_prior_sigma: HEIGHT_PRIOR_SIGMA,
        pair_priors: true,
        ..ScenarioConfig::default()
    };
    let scene = |seed, size: [f64; 3], anchors, kind, speed| ScenarioConfig {
        seed,
        volume: Volume::new([0.0; 3], size),
        anchor_count: anchors,
        trajectory: kind,
        speed,
        ..base.clone()
    };
    vec![
        ("lab", scene(11, [20.0, 15.0, 4.0], 4, TrajectoryKind::Figure8, 1.5)),
        ("atrium", scene(12, [20.0, 20.0, 10.0], 6, TrajectoryKind::Figure8, 1.5)),
        ("corridor", scene(13, [40.0, 12.0, 6.0], 6, TrajectoryKind::Lawnmower, 1.5)),
        ("yard", scene(14, [30.0, 30.0, 8.0], 5, TrajectoryKind::RandomWaypoint, 2.0)),
        ("carpark", scene(15, [50.0, 35.0, 10.0], 8, TrajectoryKind::Figure8, 2.5)),
        ("hall", ScenarioConfig { spike_prob: 0.1, ..scene(16, [140.0, 65.0, 30.0], 8, TrajectoryKind::Figure8, 3.0) }),
    ]
}

pub fn calibrate_first(sc: &ScenarioTruth) -> CalibrationResult {
    let s = &sc.sequences[0];
    let priors = AnchorPriors { pairs: sc.pair_priors.clone(), heights: sc.height_priors.clone() };
    let cfg = ApcConfig { use_height_priors: !priors.heights.is_empty(), ..ApcConfig::default() };
    calibrate(&s.odometry, &s.ranges, &sc.extrinsics, &priors, &cfg)
        .expect("calibration of sequence 01")
}

/// Odometry carried into the anchor frame with the true start registration,
/// so its error against ground truth is accumulated drift alone.
pub fn registered_odometry(seq: &SequenceTruth) -> Trajectory {
    let poses = seq.odometry.poses().iter().map(|p| seq.s_in_u.compose(p).at(p.t)).collect();
    Trajectory::new(poses, Frame::Anchor).unwrap()
}

pub struct FusionCase {
    pub scene: &'static str,
    pub sequence: usize,
    pub fused_ate: f64,
    pub raw_ate: f64,
    /// Raw odometry after a best rigid fit to ground truth.
    pub raw_rigid_ate: f64,
    pub run: FusionRun,
}

/// Calibrate from sequence 01 of every scene and fuse sequences 02 and 03.
pub fn fusion_suite() -> Vec<FusionCase> {
    let mut out = Vec::new();
    for (name, cfg) in scenario_suite() {
        let sc = generate(&cfg).unwrap();
        let cal = calibrate_first(&sc);
        for (k, seq) in sc.sequences.iter().enumerate().skip(1) {
            let run = run_fusion(&seq.odometry, &seq.ranges, &cal.anchors, &cal.biases, &sc.extrinsics, &FusionConfig::default())
                .expect("fusion");
            let fused_ate = ate(run.trajectory(), &seq.truth, Alignment::None).unwrap().rmse;
            let raw_ate = ate(&registered_odometry(seq), &seq.truth, Alignment::None).unwrap().rmse;
            let raw_rigid_ate = ate(&seq.odometry, &seq.truth, Alignment::Rigid).unwrap().rmse;
            out.push(FusionCase { scene: name, sequence: k + 1, fused_ate, raw_ate, raw_rigid_ate, run });
        }
    }
    out
}
