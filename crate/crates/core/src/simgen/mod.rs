//! Deterministic synthetic scenes for oracles and demos.
//!
//! A scenario is a fixed anchor layout with fixed link biases, observed
//! during one or more sequences. Each sequence has its own ground-truth
//! path, its own odometry frame S (gravity aligned, origin at the start
//! position, yawed with the platform's initial heading) and its own noisy
//! ranges. All truth is expressed in U, the S frame of the first sequence,
//! so a calibration from sequence 1 is directly comparable with it.
//!
//! The body frame is flipped about x (z down) at rest. Ranges satisfy
//! `d = true distance − bias + noise + spike`, so a calibrated bias `b`
//! corrects them as `d + b`.

mod labels;
mod paths;

use std::collections::BTreeMap;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::factors::{
    predicted_range, AnchorHeightPrior, AnchorId, AnchorPairPrior, Link, LinkBias, RangeMeasurement, TagExtrinsics,
};
use crate::geometry::{Frame, Pose, Rotation, Trajectory};

pub use labels::{label_report, ConfusionMatrix, LabelError};
pub use paths::TrajectoryKind;

use paths::Path;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("anchor {0} lies outside the volume")]
    AnchorOutsideVolume(AnchorId),
}

/// Axis-aligned box, meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Volume {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Volume {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Volume { min: min.into(), max: max.into() }
    }

    pub fn size(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn center(&self) -> Vector3<f64> {
        0.5 * (self.min + self.max)
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub volume: Volume,
    /// Anchors placed near the volume corners when `anchors` is empty.
    pub anchor_count: usize,
    /// Explicit anchor positions in the volume frame.
    pub anchors: BTreeMap<AnchorId, Vector3<f64>>,
    pub tags: BTreeMap<crate::factors::TagId, Vector3<f64>>,
    pub trajectory: TrajectoryKind,
    pub sequences: usize,
    /// Per-sequence duration including the stationary prefix, seconds.
    pub duration: f64,
    /// Overrides `duration` for the first `durations.len()` sequences.
    pub durations: Vec<f64>,
    pub stationary: f64,
    /// Nominal platform speed, m/s.
    pub speed: f64,
    /// Peak roll and pitch wobble, degrees.
    pub tilt_deg: f64,
    /// Peak yaw swing about the initial heading, degrees.
    pub yaw_swing_deg: f64,
    pub odom_rate: f64,
    pub range_rate: f64,
    pub range_sigma: f64,
    pub spike_prob: f64,
    pub spike_min: f64,
    pub spike_max: f64,
    /// Link biases are drawn from U(−bias_max, bias_max).
    pub bias_max: f64,
    /// Per-step odometry noise: translation (m) and rotation (degrees).
    pub drift_trans: f64,
    pub drift_rot_deg: f64,
    pub pair_priors: bool,
    /// Error of emitted height priors, which scatter around the true
    /// heights; none are emitted when 0.
    pub height_prior_sigma: f64,
    /// Emit the true heights, keeping `height_prior_sigma` as their stated
    /// error.
    pub exact_height_priors: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let tags = [("200A", [0.4, 0.0, 0.0]), ("201A", [-0.4, 0.0, 0.0])]
            .into_iter()
            .map(|(id, o)| (id.into(), Vector3::from(o)))
            .collect();
        ScenarioConfig {
            seed: 1,
            volume: Volume::new([0.0, 0.0, 0.0], [20.0, 15.0, 4.0]),
            anchor_count: 4,
            anchors: BTreeMap::new(),
            tags,
            trajectory: TrajectoryKind::Figure8,
            sequences: 1,
            duration: 300.0,
            durations: Vec::new(),
            stationary: 5.0,
            speed: 1.5,
            tilt_deg: 3.0,
            yaw_swing_deg: 45.0,
            odom_rate: 10.0,
            range_rate: 65.0,
            range_sigma: 0.05,
            spike_prob: 0.05,
            spike_min: 1.0,
            spike_max: 10.0,
            bias_max: 0.1,
            drift_trans: 0.001,
            drift_rot_deg: 0.01,
            pair_priors: false,
            height_prior_sigma: 0.0,
            exact_height_priors: false,
        }
    }
}

impl ScenarioConfig {
    /// No noise, spikes or drift, and exact height priors. Link biases
    /// stay: they are a deterministic part of the range model.
    pub fn noiseless(mut self) -> Self {
        self.range_sigma = 0.0;
        self.spike_prob = 0.0;
        self.drift_trans = 0.0;
        self.drift_rot_deg = 0.0;
        self.exact_height_priors = true;
        self
    }

    /// Duration of sequence `seq`, seconds.
    pub fn duration_of(&self, seq: usize) -> f64 {
        self.durations.get(seq).copied().unwrap_or(self.duration)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: &str| Err(ConfigError::Invalid(msg.to_owned()));
        let size = self.volume.size();
        if !(size.iter().all(|v| *v > 0.0)) {
            return bad("volume must have positive extent");
        }
        if !(self.odom_rate > 0.0 && self.range_rate > 0.0) {
            return bad("rates must be positive");
        }
        if self.durations.iter().chain([&self.duration]).any(|d| !d.is_finite()) {
            return bad("durations must be finite");
        }
        let shortest = self.durations.iter().copied().fold(self.duration, f64::min);
        if !(self.stationary >= 0.0 && shortest > self.stationary) {
            return bad("duration must exceed the stationary prefix");
        }
        if !(0.0..=1.0).contains(&self.spike_prob) {
            return bad("spike probability must lie in [0, 1]");
        }
        if self.spike_prob > 0.0 && !(self.spike_min > 0.0 && self.spike_max >= self.spike_min) {
            return bad("spike magnitudes must satisfy 0 < min <= max");
        }
        let sigmas = [self.range_sigma, self.bias_max, self.drift_trans, self.drift_rot_deg, self.height_prior_sigma];
        if sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return bad("noise magnitudes must be finite and non-negative");
        }
        if !(self.speed > 0.0) {
            return bad("speed must be positive");
        }
        if self.sequences == 0 {
            return bad("at least one sequence is required");
        }
        if self.tags.is_empty() {
            return bad("at least one tag is required");
        }
        if self.anchors.is_empty() && self.anchor_count < 4 {
            return bad("at least 4 anchors are needed for a 3D fix");
        }
        if let Some((id, _)) = self.anchors.iter().find(|(_, p)| !self.volume.contains(p)) {
            return Err(ConfigError::AnchorOutsideVolume(id.clone()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "magnitude", rename_all = "snake_case")]
pub enum RangeLabel {
    Clean,
    /// Non-line-of-sight spike of the given size, meters.
    Spike(f64),
}

impl RangeLabel {
    pub fn is_spike(&self) -> bool {
        matches!(self, RangeLabel::Spike(_))
    }
}

/// One simulated run.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceTruth {
    /// Ground truth in U, sampled at the odometry timestamps.
    pub truth: Trajectory,
    /// Drifted odometry in this sequence's S frame.
    pub odometry: Trajectory,
    pub ranges: Vec<RangeMeasurement>,
    /// One label per entry of `ranges`.
    pub labels: Vec<RangeLabel>,
    /// Pose of this sequence's S frame in U.
    pub s_in_u: Pose,
}

impl SequenceTruth {
    /// Ground-truth pose at range timestamp `t`.
    pub fn truth_at(&self, t: f64) -> Option<Pose> {
        self.truth.interpolate(t).ok()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioTruth {
    pub config: ScenarioConfig,
    /// Anchor positions in U.
    pub anchors: BTreeMap<AnchorId, Vector3<f64>>,
    pub biases: LinkBias,
    pub extrinsics: TagExtrinsics,
    pub pair_priors: Vec<AnchorPairPrior>,
    pub height_priors: Vec<AnchorHeightPrior>,
    pub sequences: Vec<SequenceTruth>,
}

/// Random streams, one per purpose, so changing one knob does not reshuffle
/// unrelated draws.
fn stream(seed: u64, purpose: u64, sequence: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose << 32 | sequence as u64);
    rng
}

const LAYOUT: u64 = 1;
const PATH: u64 = 2;
const RANGES: u64 = 3;
const DRIFT: u64 = 4;
const PRIORS: u64 = 5;

fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    sigma * rng.sample::<f64, _>(StandardNormal)
}

fn place_anchors(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> BTreeMap<AnchorId, Vector3<f64>> {
    if !cfg.anchors.is_empty() {
        return cfg.anchors.clone();
    }
    let (vol, n) = (&cfg.volume, cfg.anchor_count);
    let size = vol.size();
    (0..n)
        .map(|i| {
            // walk the perimeter of an inset rectangle, starting at a corner
            let s = i as f64 / n as f64 * 4.0;
            let (side, f) = (s.floor() as usize, s.fract());
            let (u, v) = match side {
                0 => (f, 0.0),
                1 => (1.0, f),
                2 => (1.0 - f, 1.0),
                _ => (0.0, 1.0 - f),
            };
            let jitter = Vector3::new(rng.random_range(-0.02..0.02), rng.random_range(-0.02..0.02), 0.0);
            let height = 0.15 + 0.7 * i as f64 / (n - 1) as f64;
            let rel = Vector3::new(0.05 + 0.9 * u, 0.05 + 0.9 * v, height) + jitter;
            (AnchorId(format!("{}", 100 + i)), vol.min + rel.component_mul(&size))
        })
        .collect()
}

/// Platform attitude in the volume frame, `tau` seconds after motion began.
fn attitude(cfg: &ScenarioConfig, heading: f64, phase: f64, tau: f64) -> Rotation {
    let tilt = cfg.tilt_deg.to_radians();
    let yaw = heading + cfg.yaw_swing_deg.to_radians() * (0.11 * tau).sin();
    let pitch = tilt * (0.5 * tau + phase).sin() * (tau * 0.5).min(1.0);
    let roll = tilt * (0.37 * tau).sin();
    Rotation::rot_z(yaw) * Rotation::rot_y(pitch) * Rotation::rot_x(std::f64::consts::PI + roll)
}

/// Ground truth in the volume frame at the odometry timestamps.
fn truth_samples(cfg: &ScenarioConfig, seq: usize) -> Result<Vec<Pose>, ConfigError> {
    let mut rng = stream(cfg.seed, PATH, seq);
    let duration = cfg.duration_of(seq);
    let moving = duration - cfg.stationary;
    let path = Path::sample(cfg.trajectory, &cfg.volume, cfg.speed, cfg.speed * moving * 1.1, &mut rng);
    let heading = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let steps = (duration * cfg.odom_rate).round() as usize;
    let poses: Vec<Pose> = (0..=steps)
        .map(|k| {
            let t = k as f64 / cfg.odom_rate;
            let tau = (t - cfg.stationary).max(0.0);
            Pose::new(t, path.position(tau), attitude(cfg, heading, phase, tau))
        })
        .collect();
    if let Some(p) = poses.iter().find(|p| !cfg.volume.contains(&p.p)) {
        return Err(ConfigError::Invalid(format!("trajectory leaves the volume at t = {}", p.t)));
    }
    debug_assert!(path.max_speed().is_finite());
    Ok(poses)
}

/// Gravity-aligned frame at the first pose, yawed with its heading.
fn odometry_frame(first: &Pose) -> Pose {
    Pose::new(0.0, first.p, Rotation::rot_z(first.r.yaw()))
}

fn drifted_odometry(cfg: &ScenarioConfig, seq: usize, truth_s: &[Pose]) -> Vec<Pose> {
    // Gravity keeps roll and pitch observable, so only yaw and translation
    // wander: each step perturbs heading about the vertical axis.
    let mut rng = stream(cfg.seed, DRIFT, seq);
    let rot_sigma = cfg.drift_rot_deg.to_radians();
    let mut out = Vec::with_capacity(truth_s.len());
    out.push(truth_s[0]);
    for w in truth_s.windows(2) {
        let inc = w[0].between(&w[1]);
        let yaw = gaussian(&mut rng, rot_sigma);
        let noise_t = Vector3::from_fn(|_, _| gaussian(&mut rng, cfg.drift_trans));
        let next = out[out.len() - 1].compose(&inc);
        out.push(Pose::new(w[1].t, next.p + noise_t, Rotation::rot_z(yaw) * next.r));
    }
    out
}

fn simulate_ranges(
    cfg: &ScenarioConfig,
    seq: usize,
    truth: &Trajectory,
    anchors: &BTreeMap<AnchorId, Vector3<f64>>,
    biases: &LinkBias,
    extrinsics: &TagExtrinsics,
) -> (Vec<RangeMeasurement>, Vec<RangeLabel>) {
    let mut rng = stream(cfg.seed, RANGES, seq);
    let links: Vec<Link> = extrinsics
        .iter()
        .flat_map(|(tag, _)| anchors.keys().map(|a| Link { tag: tag.clone(), anchor: a.clone() }))
        .collect();
    let end = truth.end_time().expect("truth is non-empty");
    let mut ranges = Vec::new();
    let mut labels = Vec::new();
    for m in 0.. {
        let t = (m as f64 + 0.5) / cfg.range_rate;
        if t > end {
            break;
        }
        let link = &links[m % links.len()];
        let pose = truth.interpolate(t).expect("t is inside the truth span");
        let exact = predicted_range(&pose, &extrinsics.0[&link.tag], &anchors[&link.anchor]);
        let noise = gaussian(&mut rng, cfg.range_sigma);
        // draw both numbers every time so the noise sequence does not depend on spike_prob
        let spiked = rng.random::<f64>() < cfg.spike_prob;
        let magnitude = if cfg.spike_prob > 0.0 { rng.random_range(cfg.spike_min..=cfg.spike_max) } else { 0.0 };
        let (spike, label) = if spiked { (magnitude, RangeLabel::Spike(magnitude)) } else { (0.0, RangeLabel::Clean) };
        let d = exact - biases.get(&link.tag, &link.anchor) + noise + spike;
        ranges.push(RangeMeasurement { t, tag: link.tag.clone(), anchor: link.anchor.clone(), d });
        labels.push(label);
    }
    (ranges, labels)
}

/// Generate every sequence of a scenario. Deterministic in `cfg`.
pub fn generate(cfg: &ScenarioConfig) -> Result<ScenarioTruth, ConfigError> {
    cfg.validate()?;
    let mut layout = stream(cfg.seed, LAYOUT, 0);
    let anchors_w = place_anchors(cfg, &mut layout);
    if let Some((id, _)) = anchors_w.iter().find(|(_, p)| !cfg.volume.contains(p)) {
        return Err(ConfigError::AnchorOutsideVolume(id.clone()));
    }
    let extrinsics = TagExtrinsics(cfg.tags.clone());
    let mut biases = LinkBias::default();
    for tag in cfg.tags.keys() {
        for anchor in anchors_w.keys() {
            let b = if cfg.bias_max > 0.0 { layout.random_range(-cfg.bias_max..cfg.bias_max) } else { 0.0 };
            biases.set(Link { tag: tag.clone(), anchor: anchor.clone() }, b);
        }
    }

    let samples: Vec<Vec<Pose>> = (0..cfg.sequences).map(|s| truth_samples(cfg, s)).collect::<Result<_, _>>()?;
    let u_in_w = odometry_frame(&samples[0][0]);
    let w_to_u = u_in_w.inverse();
    let anchors: BTreeMap<_, _> = anchors_w.iter().map(|(id, p)| (id.clone(), w_to_u.transform_point(p))).collect();

    let mut sequences = Vec::with_capacity(cfg.sequences);
    for (s, poses_w) in samples.into_iter().enumerate() {
        let s_in_w = odometry_frame(&poses_w[0]);
        let w_to_s = s_in_w.inverse();
        let truth_u: Vec<Pose> = poses_w.iter().map(|p| w_to_u.compose(p).at(p.t)).collect();
        let truth_s: Vec<Pose> = poses_w.iter().map(|p| w_to_s.compose(p).at(p.t)).collect();
        let odometry = drifted_odometry(cfg, s, &truth_s);
        let truth = Trajectory::new(truth_u, Frame::Anchor).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let odometry = Trajectory::new(odometry, Frame::Slam).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let (ranges, labels) = simulate_ranges(cfg, s, &truth, &anchors, &biases, &extrinsics);
        sequences.push(SequenceTruth { truth, odometry, ranges, labels, s_in_u: w_to_u.compose(&s_in_w) });
    }

    let ids: Vec<&AnchorId> = anchors.keys().collect();
    let pair_priors = if cfg.pair_priors {
        ids.iter()
            .enumerate()
            .flat_map(|(i, a)| ids[i + 1..].iter().map(move |b| (*a, *b)))
            .map(|(a, b)| AnchorPairPrior { a: a.clone(), b: b.clone(), distance: (anchors[a] - anchors[b]).norm() })
            .collect()
    } else {
        Vec::new()
    };
    let height_priors = if cfg.height_prior_sigma > 0.0 {
        // a surveyed height carries its own stated error
        let mut rng = stream(cfg.seed, PRIORS, 0);
        let sigma = cfg.height_prior_sigma;
        anchors
            .iter()
            .map(|(id, p)| AnchorHeightPrior { anchor: id.clone(), height: p.z + if cfg.exact_height_priors { 0.0 } else { gaussian(&mut rng, sigma) }, sigma })
            .collect()
    } else {
        Vec::new()
    };
    Ok(ScenarioTruth { config: cfg.clone(), anchors, biases, extrinsics, pair_priors, height_priors, sequences })
}
