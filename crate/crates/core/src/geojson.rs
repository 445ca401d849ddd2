//! Minimal GeoJSON FeatureCollection of single-ring polygons and points.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::geometry::Point;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Geometry {
    Polygon { coordinates: Vec<Vec<Point>> },
    Point { coordinates: Point },
}

impl Geometry {
    /// Polygon from an open ring; the closing vertex is added.
    pub fn polygon(ring: &[Point]) -> Geometry {
        let mut closed = ring.to_vec();
        if let (Some(&first), Some(&last)) = (ring.first(), ring.last()) {
            if first != last {
                closed.push(first);
            }
        }
        Geometry::Polygon { coordinates: vec![closed] }
    }

    /// Exterior ring without the closing vertex. Holes are ignored.
    pub fn exterior(&self) -> Option<Vec<Point>> {
        match self {
            Geometry::Polygon { coordinates } => {
                let mut ring = coordinates.first()?.clone();
                if ring.len() > 1 && ring.first() == ring.last() {
                    ring.pop();
                }
                Some(ring)
            }
            Geometry::Point { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename = "Feature")]
pub struct Feature {
    pub geometry: Geometry,
    #[serde(default)]
    pub properties: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename = "FeatureCollection")]
pub struct FeatureCollection {
    pub features: Vec<Feature>,
}

impl FeatureCollection {
    pub fn parse(text: &str, context: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json(context, &e))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("feature collection serializes");
        s.push('\n');
        s
    }
}

/// Typed property lookup with a message naming the feature and key.
pub fn property<T: serde::de::DeserializeOwned>(feature: &Feature, index: usize, key: &str) -> Result<T> {
    let value = feature
        .properties
        .get(key)
        .ok_or_else(|| Error::Validation(format!("feature {index}: missing property {key:?}")))?;
    serde_json::from_value(value.clone())
        .map_err(|e| Error::Validation(format!("feature {index}: property {key:?}: {e}")))
}
