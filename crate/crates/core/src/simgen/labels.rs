use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::RangeLabel;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{labels} labels but {decisions} decisions")]
pub struct LabelError {
    pub labels: usize,
    pub decisions: usize,
}

/// Spike rejection scored against simulator labels. "Positive" means the
/// gate dropped the measurement.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// Spike dropped.
    pub tp: usize,
    /// Clean measurement dropped.
    pub fp: usize,
    /// Clean measurement kept.
    pub tn: usize,
    /// Spike kept.
    pub fn_: usize,
}

impl ConfusionMatrix {
    /// Fraction of spikes dropped; 1 when there were none.
    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Fraction of clean measurements kept; 1 when there were none.
    pub fn retention(&self) -> f64 {
        ratio(self.tn, self.tn + self.fp)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

impl std::ops::AddAssign for ConfusionMatrix {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.tn += o.tn;
        self.fn_ += o.fn_;
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        1.0
    } else {
        a as f64 / b as f64
    }
}

/// Score keep/drop decisions (`kept[i]` for measurement `i`) against labels.
pub fn label_report(labels: &[RangeLabel], kept: &[bool]) -> Result<ConfusionMatrix, LabelError> {
    if labels.len() != kept.len() {
        return Err(LabelError { labels: labels.len(), decisions: kept.len() });
    }
    let mut cm = ConfusionMatrix::default();
    for (l, &k) in labels.iter().zip(kept) {
        match (l.is_spike(), k) {
            (true, false) => cm.tp += 1,
            (true, true) => cm.fn_ += 1,
            (false, false) => cm.fp += 1,
            (false, true) => cm.tn += 1,
        }
    }
    Ok(cm)
}
