//! File formats, run bundles and trajectory error evaluation.
//!
//! Every writer goes through [`write_atomic`], so a reader never observes a
//! half-written file. Floats are written in Rust's shortest round-trip form,
//! so every writer/parser pair reproduces values bit for bit.

mod ate;
mod bundle;
mod calibration;
mod tables;
mod trajectory;
mod truth;

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

pub use ate::{ate, rigid_align, Alignment, AteError, AteReport, ASSOCIATION_WINDOW, MIN_PAIRS};
pub use bundle::{RunBundle, RunData, BUNDLE_FILE};
pub use calibration::{
    format_calibration, parse_calibration, parse_calibration_str, write_calibration, ParsedCalibration,
    FORMAT_VERSION,
};
pub use tables::{
    format_ranges, parse_extrinsics, parse_height_priors, parse_pair_priors, parse_ranges, parse_ranges_str,
    write_extrinsics, write_height_priors, write_pair_priors, write_ranges, RangeFile,
};
pub use trajectory::{format_trajectory, parse_trajectory, parse_trajectory_str, write_trajectory};
pub use truth::{read_truth, sequence_dir, write_sequence, TruthDoc};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {reason}", path.display())]
    Parse { path: PathBuf, line: usize, reason: String },
    #[error("{}:{line}: duplicate timestamp {t}", path.display())]
    DuplicateTimestamp { path: PathBuf, line: usize, t: f64 },
    #[error("{}: format version {found}, expected {expected}", path.display())]
    VersionMismatch { path: PathBuf, found: u64, expected: u64 },
}

impl DataError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DataError::Io { path: path.to_owned(), source }
    }

    pub(crate) fn parse(path: &Path, line: usize, reason: impl Into<String>) -> Self {
        DataError::Parse { path: path.to_owned(), line, reason: reason.into() }
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, DataError> {
    std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), DataError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| DataError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| DataError::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| DataError::io(path, e))?;
    tmp.persist(path).map_err(|e| DataError::io(path, e.error))?;
    Ok(())
}

/// Path of the config echo that accompanies `output`.
pub fn config_echo_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".config.json");
    output.with_file_name(name)
}

/// Record the configuration that produced `output` next to it.
pub fn write_config_echo<C: Serialize>(output: &Path, config: &C) -> Result<(), DataError> {
    let path = config_echo_path(output);
    let text = serde_json::to_string_pretty(config).map_err(|e| DataError::parse(&path, 0, e.to_string()))?;
    write_atomic(&path, (text + "\n").as_bytes())
}
