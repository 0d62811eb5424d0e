//! `bundle.toml` manifests tying together the files of one run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::apc::AnchorPriors;
use crate::factors::TagExtrinsics;
use crate::geometry::{Frame, Trajectory};

use super::tables::{parse_extrinsics, parse_height_priors, parse_pair_priors, parse_ranges, RangeFile};
use super::trajectory::parse_trajectory;
use super::{read_text, write_atomic, DataError};

pub const BUNDLE_FILE: &str = "bundle.toml";

/// File names of one run. Relative paths are resolved against the
/// directory holding the manifest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBundle {
    pub trajectory: PathBuf,
    pub ranges: PathBuf,
    pub extrinsics: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_priors: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height_priors: Option<PathBuf>,
}

/// Everything a run bundle points at, parsed.
#[derive(Clone, Debug, PartialEq)]
pub struct RunData {
    pub trajectory: Trajectory,
    pub ranges: RangeFile,
    pub extrinsics: TagExtrinsics,
    pub priors: AnchorPriors,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl RunBundle {
    /// Conventional file names inside a run directory.
    pub fn standard(with_pairs: bool, with_heights: bool) -> Self {
        RunBundle {
            trajectory: "trajectory.txt".into(),
            ranges: "ranges.csv".into(),
            extrinsics: "extrinsics.csv".into(),
            pair_priors: with_pairs.then(|| "pair_priors.csv".into()),
            height_priors: with_heights.then(|| "height_priors.csv".into()),
        }
    }

    /// Read a manifest, given either its path or its directory, and make
    /// every path absolute.
    pub fn load(path: &Path) -> Result<RunBundle, DataError> {
        let file = if path.is_dir() { path.join(BUNDLE_FILE) } else { path.to_owned() };
        let text = read_text(&file)?;
        let mut bundle: RunBundle = toml::from_str(&text).map_err(|e| {
            let line = e.span().map_or(0, |s| line_of(&text, s.start));
            DataError::parse(&file, line, e.message().to_owned())
        })?;
        let base = file.parent().map(Path::to_owned).unwrap_or_default();
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut bundle.trajectory);
        resolve(&mut bundle.ranges);
        resolve(&mut bundle.extrinsics);
        bundle.pair_priors.as_mut().map(resolve);
        bundle.height_priors.as_mut().map(resolve);
        Ok(bundle)
    }

    pub fn write(&self, dir: &Path) -> Result<(), DataError> {
        let path = dir.join(BUNDLE_FILE);
        let text = toml::to_string(self).map_err(|e| DataError::parse(&path, 0, e.to_string()))?;
        write_atomic(&path, text.as_bytes())
    }

    /// Parse every referenced file. The trajectory is read in the SLAM frame.
    pub fn read(&self) -> Result<RunData, DataError> {
        Ok(RunData {
            trajectory: parse_trajectory(&self.trajectory, Frame::Slam)?,
            ranges: parse_ranges(&self.ranges)?,
            extrinsics: parse_extrinsics(&self.extrinsics)?,
            priors: AnchorPriors {
                pairs: self.pair_priors.as_deref().map(parse_pair_priors).transpose()?.unwrap_or_default(),
                heights: self.height_priors.as_deref().map(parse_height_priors).transpose()?.unwrap_or_default(),
            },
        })
    }
}
