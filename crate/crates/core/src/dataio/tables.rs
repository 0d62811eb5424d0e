//! Comma-separated tables: ranges, extrinsics and anchor priors.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use crate::factors::{AnchorHeightPrior, AnchorId, AnchorPairPrior, RangeMeasurement, TagExtrinsics, TagId};

use super::{read_text, write_atomic, DataError};

const RANGES_HEADER: [&str; 4] = ["t", "tag_id", "anchor_id", "range_m"];
const EXTRINSICS_HEADER: [&str; 4] = ["tag_id", "x", "y", "z"];
const PAIRS_HEADER: [&str; 3] = ["anchor_a", "anchor_b", "distance_m"];
const HEIGHTS_HEADER: [&str; 3] = ["anchor_id", "height_m", "sigma_m"];

/// Feed each data row of a headed CSV text to `row` with its 1-based line.
fn for_rows(
    text: &str,
    path: &Path,
    header: &[&str],
    mut row: impl FnMut(&csv::StringRecord, usize) -> Result<(), DataError>,
) -> Result<(), DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let found = reader.headers().map_err(|e| DataError::parse(path, 1, e.to_string()))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(DataError::parse(path, 1, format!("expected header {}, found {}", header.join(","), found.iter().collect::<Vec<_>>().join(","))));
    }
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            DataError::parse(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        row(&record, line)?;
    }
    Ok(())
}

fn number(path: &Path, line: usize, s: &str) -> Result<f64, DataError> {
    s.parse::<f64>().map_err(|_| DataError::parse(path, line, format!("not a number: {s}")))
}

fn finite(path: &Path, line: usize, s: &str) -> Result<f64, DataError> {
    let v = number(path, line, s)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(DataError::parse(path, line, format!("non-finite value: {s}")))
    }
}

fn nonempty<'a>(path: &Path, line: usize, s: &'a str, what: &str) -> Result<&'a str, DataError> {
    if s.is_empty() {
        Err(DataError::parse(path, line, format!("empty {what}")))
    } else {
        Ok(s)
    }
}

/// Parsed ranges plus the number of rows skipped as unusable.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RangeFile {
    pub ranges: Vec<RangeMeasurement>,
    pub skipped: usize,
}

pub fn parse_ranges(path: &Path) -> Result<RangeFile, DataError> {
    parse_ranges_str(&read_text(path)?, path)
}

/// Rows with a non-positive or non-finite range are skipped with a
/// warning; malformed rows are errors. Output is sorted by time.
pub fn parse_ranges_str(text: &str, path: &Path) -> Result<RangeFile, DataError> {
    let mut out = RangeFile::default();
    for_rows(text, path, &RANGES_HEADER, |r, line| {
        let t = finite(path, line, &r[0])?;
        let tag = nonempty(path, line, &r[1], "tag id")?;
        let anchor = nonempty(path, line, &r[2], "anchor id")?;
        let d = number(path, line, &r[3])?;
        if !(d.is_finite() && d > 0.0) {
            log::warn!("{}:{line}: skipping range {d}", path.display());
            out.skipped += 1;
            return Ok(());
        }
        out.ranges.push(RangeMeasurement::new(t, tag, anchor, d));
        Ok(())
    })?;
    out.ranges.sort_by(|a, b| a.t.total_cmp(&b.t));
    if out.skipped > 0 {
        log::warn!("{}: skipped {} unusable ranges", path.display(), out.skipped);
    }
    Ok(out)
}

pub fn format_ranges(ranges: &[RangeMeasurement]) -> String {
    let mut out = RANGES_HEADER.join(",") + "\n";
    for m in ranges {
        writeln!(out, "{},{},{},{}", m.t, m.tag, m.anchor, m.d).expect("string write");
    }
    out
}

pub fn write_ranges(path: &Path, ranges: &[RangeMeasurement]) -> Result<(), DataError> {
    write_atomic(path, format_ranges(ranges).as_bytes())
}

pub fn parse_extrinsics(path: &Path) -> Result<TagExtrinsics, DataError> {
    let text = read_text(path)?;
    let mut out = TagExtrinsics::new();
    for_rows(&text, path, &EXTRINSICS_HEADER, |r, line| {
        let tag = nonempty(path, line, &r[0], "tag id")?;
        let v = Vector3::new(finite(path, line, &r[1])?, finite(path, line, &r[2])?, finite(path, line, &r[3])?);
        if out.get(&TagId::from(tag)).is_some() {
            return Err(DataError::parse(path, line, format!("tag {tag} listed twice")));
        }
        out.insert(tag, v);
        Ok(())
    })?;
    Ok(out)
}

pub fn write_extrinsics(path: &Path, ext: &TagExtrinsics) -> Result<(), DataError> {
    let mut out = EXTRINSICS_HEADER.join(",") + "\n";
    for (tag, o) in ext.iter() {
        writeln!(out, "{},{},{},{}", tag, o.x, o.y, o.z).expect("string write");
    }
    write_atomic(path, out.as_bytes())
}

pub fn parse_pair_priors(path: &Path) -> Result<Vec<AnchorPairPrior>, DataError> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for_rows(&text, path, &PAIRS_HEADER, |r, line| {
        let prior = AnchorPairPrior {
            a: AnchorId::from(nonempty(path, line, &r[0], "anchor id")?),
            b: AnchorId::from(nonempty(path, line, &r[1], "anchor id")?),
            distance: finite(path, line, &r[2])?,
        };
        if !prior.is_valid() {
            return Err(DataError::parse(path, line, "pair prior needs two distinct anchors and a positive distance"));
        }
        out.push(prior);
        Ok(())
    })?;
    Ok(out)
}

pub fn write_pair_priors(path: &Path, priors: &[AnchorPairPrior]) -> Result<(), DataError> {
    let mut out = PAIRS_HEADER.join(",") + "\n";
    for p in priors {
        writeln!(out, "{},{},{}", p.a, p.b, p.distance).expect("string write");
    }
    write_atomic(path, out.as_bytes())
}

pub fn parse_height_priors(path: &Path) -> Result<Vec<AnchorHeightPrior>, DataError> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for_rows(&text, path, &HEIGHTS_HEADER, |r, line| {
        let sigma = finite(path, line, &r[2])?;
        if sigma <= 0.0 {
            return Err(DataError::parse(path, line, "height sigma must be positive"));
        }
        out.push(AnchorHeightPrior {
            anchor: AnchorId::from(nonempty(path, line, &r[0], "anchor id")?),
            height: finite(path, line, &r[1])?,
            sigma,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn write_height_priors(path: &Path, priors: &[AnchorHeightPrior]) -> Result<(), DataError> {
    let mut out = HEIGHTS_HEADER.join(",") + "\n";
    for p in priors {
        writeln!(out, "{},{},{}", p.anchor, p.height, p.sigma).expect("string write");
    }
    write_atomic(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("ranges.csv")
    }

    #[test]
    fn range_examples() {
        let ok = "t,tag_id,anchor_id,range_m\n0.5,200A,100,3.2\n0.1,201A,101,4.0\n0.2,200A,102,5.5\n";
        let f = parse_ranges_str(ok, p()).unwrap();
        assert_eq!(f.ranges.len(), 3);
        assert_eq!(f.ranges[0].t, 0.1);
        let neg = "t,tag_id,anchor_id,range_m\n0.5,200A,100,-1\n0.6,200A,100,2\n";
        let f = parse_ranges_str(neg, p()).unwrap();
        assert_eq!((f.ranges.len(), f.skipped), (1, 1));
        let bad = "t,tag_id,anchor_id,range_m\n0.5,200A,100,abc\n";
        assert!(matches!(parse_ranges_str(bad, p()), Err(DataError::Parse { line: 2, .. })));
        assert!(parse_ranges_str("time,tag,anchor,d\n", p()).is_err());
        assert!(parse_ranges_str("t,tag_id,anchor_id,range_m\n1,2,3\n", p()).is_err());
    }

    #[test]
    fn range_round_trip() {
        let ranges: Vec<_> = (0..200).map(|i| RangeMeasurement::new(i as f64 / 65.0, "200A", "101", 1.0 + (i as f64).sqrt() / 3.0)).collect();
        assert_eq!(parse_ranges_str(&format_ranges(&ranges), p()).unwrap().ranges, ranges);
    }

    #[test]
    fn tables_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut ext = TagExtrinsics::new();
        ext.insert("200A", Vector3::new(0.4, 0.0, -0.1));
        ext.insert("201A", Vector3::new(-0.4, 1.0 / 3.0, 0.0));
        let pe = dir.path().join("extrinsics.csv");
        write_extrinsics(&pe, &ext).unwrap();
        assert_eq!(parse_extrinsics(&pe).unwrap(), ext);

        let pairs = vec![AnchorPairPrior { a: "100".into(), b: "101".into(), distance: 12.25 }];
        let pp = dir.path().join("pairs.csv");
        write_pair_priors(&pp, &pairs).unwrap();
        assert_eq!(parse_pair_priors(&pp).unwrap(), pairs);

        let heights = vec![AnchorHeightPrior { anchor: "100".into(), height: 2.5, sigma: 0.05 }];
        let ph = dir.path().join("heights.csv");
        write_height_priors(&ph, &heights).unwrap();
        assert_eq!(parse_height_priors(&ph).unwrap(), heights);
    }
}
