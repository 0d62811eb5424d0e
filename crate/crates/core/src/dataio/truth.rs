//! Writing simulated scenarios to disk in the run-bundle layout.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::factors::{AnchorId, Link, LinkBias};
use crate::geometry::{Pose, Rotation};
use crate::simgen::{RangeLabel, ScenarioTruth};

use super::bundle::RunBundle;
use super::tables::{write_extrinsics, write_height_priors, write_pair_priors, write_ranges};
use super::trajectory::write_trajectory;
use super::{read_text, write_atomic, DataError};

/// Ground truth of one simulated sequence, as stored in `truth.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthDoc {
    pub seed: u64,
    /// Zero-based sequence index.
    pub sequence: usize,
    pub anchors: BTreeMap<AnchorId, Vector3<f64>>,
    pub biases: Vec<(Link, f64)>,
    /// Pose of the sequence's odometry frame in the anchor frame as
    /// `[x, y, z, qx, qy, qz, qw]`.
    pub s_in_u: [f64; 7],
    /// One label per row of `ranges.csv`.
    pub labels: Vec<RangeLabel>,
}

impl TruthDoc {
    pub fn link_bias(&self) -> LinkBias {
        LinkBias(self.biases.iter().cloned().collect())
    }

    pub fn s_in_u_pose(&self) -> Pose {
        let [x, y, z, qx, qy, qz, qw] = self.s_in_u;
        let r = Rotation::from_wxyz(qw, qx, qy, qz).unwrap_or_default();
        Pose::new(0.0, Vector3::new(x, y, z), r)
    }
}

/// `seq01`, `seq02`, ... under `root`.
pub fn sequence_dir(root: &Path, index: usize) -> PathBuf {
    root.join(format!("seq{:02}", index + 1))
}

/// Write sequence `index` of a scenario as a run bundle plus
/// `groundtruth.txt` and `truth.json`. Returns the sequence directory.
pub fn write_sequence(root: &Path, scenario: &ScenarioTruth, index: usize) -> Result<PathBuf, DataError> {
    let seq = &scenario.sequences[index];
    let dir = sequence_dir(root, index);
    let bundle = RunBundle::standard(!scenario.pair_priors.is_empty(), !scenario.height_priors.is_empty());
    write_trajectory(&dir.join(&bundle.trajectory), &seq.odometry)?;
    write_ranges(&dir.join(&bundle.ranges), &seq.ranges)?;
    write_extrinsics(&dir.join(&bundle.extrinsics), &scenario.extrinsics)?;
    if let Some(p) = &bundle.pair_priors {
        write_pair_priors(&dir.join(p), &scenario.pair_priors)?;
    }
    if let Some(p) = &bundle.height_priors {
        write_height_priors(&dir.join(p), &scenario.height_priors)?;
    }
    bundle.write(&dir)?;
    write_trajectory(&dir.join("groundtruth.txt"), &seq.truth)?;

    let [w, x, y, z] = seq.s_in_u.r.wxyz();
    let p = seq.s_in_u.p;
    let doc = TruthDoc {
        seed: scenario.config.seed,
        sequence: index,
        anchors: scenario.anchors.clone(),
        biases: scenario.biases.iter().map(|(l, &b)| (l.clone(), b)).collect(),
        s_in_u: [p.x, p.y, p.z, x, y, z, w],
        labels: seq.labels.clone(),
    };
    let path = dir.join("truth.json");
    let text = serde_json::to_string(&doc).map_err(|e| DataError::parse(&path, 0, e.to_string()))?;
    write_atomic(&path, text.as_bytes())?;
    Ok(dir)
}

/// Read `truth.json` from a sequence directory or file path.
pub fn read_truth(path: &Path) -> Result<TruthDoc, DataError> {
    let file = if path.is_dir() { path.join("truth.json") } else { path.to_owned() };
    let text = read_text(&file)?;
    serde_json::from_str(&text).map_err(|e| DataError::parse(&file, e.line(), e.to_string()))
}
