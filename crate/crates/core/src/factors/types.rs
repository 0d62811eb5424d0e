use std::collections::BTreeMap;
use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

macro_rules! string_id {
    ($name:ident) => {
        #[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                $name(s.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_owned())
            }
        }
    };
}

string_id!(TagId);
string_id!(AnchorId);

/// One two-way range between a tag and an anchor.
#[derive(Clone, Debug, PartialEq)]
pub struct RangeMeasurement {
    pub t: f64,
    pub tag: TagId,
    pub anchor: AnchorId,
    /// Measured distance, meters.
    pub d: f64,
}

impl RangeMeasurement {
    pub fn new(t: f64, tag: impl Into<String>, anchor: impl Into<String>, d: f64) -> Self {
        RangeMeasurement { t, tag: TagId(tag.into()), anchor: AnchorId(anchor.into()), d }
    }

    pub fn is_valid(&self) -> bool {
        self.t.is_finite() && self.d.is_finite() && self.d > 0.0
    }

    pub fn link(&self) -> Link {
        Link { tag: self.tag.clone(), anchor: self.anchor.clone() }
    }
}

/// A (tag, anchor) pair.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Link {
    pub tag: TagId,
    pub anchor: AnchorId,
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.tag, self.anchor)
    }
}

/// Body-frame lever arm of each tag, meters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TagExtrinsics(pub BTreeMap<TagId, Vector3<f64>>);

impl TagExtrinsics {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, tag: impl Into<String>, offset: Vector3<f64>) {
        self.0.insert(TagId(tag.into()), offset);
    }

    pub fn get(&self, tag: &TagId) -> Option<&Vector3<f64>> {
        self.0.get(tag)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TagId, &Vector3<f64>)> {
        self.0.iter()
    }
}

/// Known separation between two anchors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchorPairPrior {
    pub a: AnchorId,
    pub b: AnchorId,
    pub distance: f64,
}

impl AnchorPairPrior {
    pub fn is_valid(&self) -> bool {
        self.a != self.b && self.distance.is_finite() && self.distance > 0.0
    }
}

/// Prior on an anchor's z coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchorHeightPrior {
    pub anchor: AnchorId,
    pub height: f64,
    pub sigma: f64,
}

/// Constant additive range bias per link, meters. Unknown links read as 0.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinkBias(pub BTreeMap<Link, f64>);

impl LinkBias {
    pub fn get(&self, tag: &TagId, anchor: &AnchorId) -> f64 {
        // BTreeMap lookup needs an owned key; links are short strings.
        self.0.get(&Link { tag: tag.clone(), anchor: anchor.clone() }).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, link: Link, bias: f64) {
        self.0.insert(link, bias);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Link, &f64)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}
