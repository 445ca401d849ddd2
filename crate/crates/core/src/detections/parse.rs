use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dedup_vertices, is_simple, Bbox, Point};
use crate::metrics::BoxXywh;
use crate::raster::TileIndex;

/// Tolerance, in pixels, for the box enclosing the polygon.
const BOX_TOLERANCE_PX: f64 = 0.5;

/// One record of a detection results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    pub tile: String,
    pub label: String,
    pub score: f64,
    pub bbox: [f64; 4],
    pub polygon: Vec<Point>,
}

/// A validated detection in tile pixel coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// Position of the record in the results file.
    pub index: usize,
    pub tile: TileIndex,
    pub label: String,
    pub score: f64,
    pub bbox: BoxXywh,
    pub polygon: Vec<Point>,
}

impl Detection {
    pub fn to_record(&self) -> DetectionRecord {
        DetectionRecord {
            tile: self.tile.to_string(),
            label: self.label.clone(),
            score: self.score,
            bbox: [self.bbox.x, self.bbox.y, self.bbox.w, self.bbox.h],
            polygon: self.polygon.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedDetection {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedDetections {
    pub detections: Vec<Detection>,
    pub rejected: Vec<RejectedDetection>,
}

fn validate(index: usize, r: DetectionRecord) -> std::result::Result<Detection, String> {
    let tile: TileIndex = r.tile.parse().map_err(|e: Error| format!("bad tile id {:?}: {e}", r.tile))?;
    if !(0.0..=1.0).contains(&r.score) {
        return Err("score out of range".into());
    }
    let [x, y, w, h] = r.bbox;
    if r.bbox.iter().any(|v| !v.is_finite()) {
        return Err("non-finite bbox".into());
    }
    if !(w > 0.0 && h > 0.0) {
        return Err("bbox width and height must be positive".into());
    }
    if r.polygon.iter().flatten().any(|v| !v.is_finite()) {
        return Err("non-finite polygon vertex".into());
    }
    let polygon = dedup_vertices(&r.polygon);
    if polygon.len() < 3 {
        return Err("polygon has fewer than 3 distinct vertices".into());
    }
    if !is_simple(&polygon) {
        return Err("self-intersecting polygon".into());
    }
    let pb = Bbox::of(&polygon).expect("non-empty polygon");
    let t = BOX_TOLERANCE_PX;
    if pb.min_x < x - t || pb.min_y < y - t || pb.max_x > x + w + t || pb.max_y > y + h + t {
        return Err("bbox does not contain the polygon".into());
    }
    Ok(Detection {
        index,
        tile,
        label: r.label,
        score: r.score,
        bbox: BoxXywh { x, y, w, h },
        polygon,
    })
}

/// Parses a results document. Records violating a detection invariant are
/// returned in `rejected` with their index; a document that does not match
/// the record schema is an error.
pub fn parse_detections(text: &str) -> Result<ParsedDetections> {
    let records: Vec<DetectionRecord> = serde_json::from_str(text).map_err(|e| Error::json("detections", &e))?;
    let mut out = ParsedDetections::default();
    for (index, r) in records.into_iter().enumerate() {
        match validate(index, r) {
            Ok(d) => out.detections.push(d),
            Err(reason) => out.rejected.push(RejectedDetection { index, reason }),
        }
    }
    Ok(out)
}

pub fn detections_json(records: &[DetectionRecord]) -> String {
    let mut s = serde_json::to_string_pretty(records).expect("detections serialize");
    s.push('\n');
    s
}
