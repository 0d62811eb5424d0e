//! Calibration results as versioned JSON.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::apc::{ApcConfig, CalibrationResult, LinkStats};
use crate::factors::{AnchorId, Link, LinkBias, TagId};
use crate::solver::SolveReport;

use super::{read_text, write_atomic, DataError};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
struct BiasEntry {
    tag: TagId,
    anchor: AnchorId,
    bias_m: f64,
}

#[derive(Serialize, Deserialize)]
struct StatsEntry {
    tag: TagId,
    anchor: AnchorId,
    #[serde(flatten)]
    stats: LinkStats,
}

#[derive(Serialize, Deserialize)]
struct Document {
    format_version: u64,
    anchors: BTreeMap<AnchorId, Vector3<f64>>,
    #[serde(default)]
    biases: Vec<BiasEntry>,
    #[serde(default)]
    stats: Vec<StatsEntry>,
    #[serde(default)]
    config: ApcConfig,
    stage1: Option<SolveReport>,
    stage2: Option<SolveReport>,
}

/// A parsed calibration and the links whose bias was absent and read as 0.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedCalibration {
    pub result: CalibrationResult,
    pub defaulted: Vec<Link>,
}

fn empty_report() -> SolveReport {
    SolveReport {
        iterations: 0,
        initial_cost: 0.0,
        final_cost: 0.0,
        termination: crate::solver::Termination::Converged,
        cost_trace: Vec::new(),
    }
}

pub fn format_calibration(cal: &CalibrationResult) -> String {
    let doc = Document {
        format_version: FORMAT_VERSION,
        anchors: cal.anchors.clone(),
        biases: cal
            .biases
            .iter()
            .map(|(l, &b)| BiasEntry { tag: l.tag.clone(), anchor: l.anchor.clone(), bias_m: b })
            .collect(),
        stats: cal
            .stats
            .iter()
            .map(|(l, s)| StatsEntry { tag: l.tag.clone(), anchor: l.anchor.clone(), stats: s.clone() })
            .collect(),
        config: cal.config.clone(),
        stage1: Some(cal.stage1.clone()),
        stage2: Some(cal.stage2.clone()),
    };
    serde_json::to_string_pretty(&doc).expect("calibration documents serialise") + "\n"
}

pub fn write_calibration(path: &Path, cal: &CalibrationResult) -> Result<(), DataError> {
    write_atomic(path, format_calibration(cal).as_bytes())
}

pub fn parse_calibration(path: &Path) -> Result<ParsedCalibration, DataError> {
    parse_calibration_str(&read_text(path)?, path)
}

/// Inverse of [`format_calibration`].
///
/// Every tag named in the file is paired with every anchor; a pair with no
/// bias entry reads as 0 and is reported in `defaulted`.
pub fn parse_calibration_str(text: &str, path: &Path) -> Result<ParsedCalibration, DataError> {
    let json_err = |e: serde_json::Error| DataError::parse(path, e.line(), e.to_string());
    let value: serde_json::Value = serde_json::from_str(text).map_err(json_err)?;
    let found = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| DataError::parse(path, 0, "missing format_version"))?;
    if found != FORMAT_VERSION {
        return Err(DataError::VersionMismatch { path: path.to_owned(), found, expected: FORMAT_VERSION });
    }
    // Re-parse from text rather than the Value so serde_json reports lines.
    let doc: Document = serde_json::from_str(text).map_err(json_err)?;
    if let Some((id, _)) = doc.anchors.iter().find(|(_, p)| !p.iter().all(|c| c.is_finite())) {
        return Err(DataError::parse(path, 0, format!("anchor {id} has a non-finite position")));
    }

    let mut biases = LinkBias::default();
    for e in &doc.biases {
        biases.set(Link { tag: e.tag.clone(), anchor: e.anchor.clone() }, e.bias_m);
    }
    let tags: BTreeSet<&TagId> = doc.biases.iter().map(|e| &e.tag).chain(doc.stats.iter().map(|e| &e.tag)).collect();
    let mut defaulted = Vec::new();
    for tag in tags {
        for anchor in doc.anchors.keys() {
            let link = Link { tag: tag.clone(), anchor: anchor.clone() };
            if !biases.0.contains_key(&link) {
                log::warn!("{}: no bias for {link}, using 0", path.display());
                defaulted.push(link);
            }
        }
    }
    let stats = doc.stats.into_iter().map(|e| (Link { tag: e.tag, anchor: e.anchor }, e.stats)).collect();
    Ok(ParsedCalibration {
        result: CalibrationResult {
            anchors: doc.anchors,
            biases,
            stats,
            stage1: doc.stage1.unwrap_or_else(empty_report),
            stage2: doc.stage2.unwrap_or_else(empty_report),
            config: doc.config,
        },
        defaulted,
    })
}
