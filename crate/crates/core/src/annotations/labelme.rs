//! LabelMe polygon annotation documents (`imagePath`, `imageWidth`,
//! `imageHeight`, `shapes[].label`, `shapes[].points`, `shapes[].shape_type`).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Point};
use crate::raster::TILE_SIZE;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonAnnotation {
    pub label: String,
    pub vertices: Vec<Point>,
    pub image_id: String,
}

impl PolygonAnnotation {
    /// Validates and cleans a polygon: consecutive duplicate vertices are
    /// removed, then the ring must have at least 3 vertices, lie inside the
    /// `width x height` frame and be simple.
    pub fn new(label: impl Into<String>, vertices: &[Point], image_id: impl Into<String>, width: f64, height: f64) -> std::result::Result<Self, String> {
        if vertices.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err("non-finite vertex".into());
        }
        if vertices.len() < 3 {
            return Err(format!("polygon has {} points, need at least 3", vertices.len()));
        }
        if let Some(p) = vertices
            .iter()
            .find(|p| p[0] < 0.0 || p[1] < 0.0 || p[0] > width || p[1] > height)
        {
            return Err(format!(
                "vertex ({}, {}) outside the {width}x{height} frame",
                p[0], p[1]
            ));
        }
        let cleaned = geometry::dedup_vertices(vertices);
        if cleaned.len() < 3 {
            return Err("fewer than 3 distinct vertices after cleanup".into());
        }
        if !geometry::is_simple(&cleaned) {
            return Err("self-intersecting polygon".into());
        }
        Ok(PolygonAnnotation {
            label: label.into(),
            vertices: cleaned,
            image_id: image_id.into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedShape {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationFile {
    pub image_id: String,
    pub image_path: String,
    pub width: usize,
    pub height: usize,
    pub annotations: Vec<PolygonAnnotation>,
    /// Non-polygon shapes that were skipped.
    pub warnings: Vec<String>,
    pub rejected: Vec<RejectedShape>,
    /// Polygons dropped by the label filter.
    pub filtered: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseOptions {
    /// Keep only shapes with this label; `None` keeps every label.
    pub label_filter: Option<String>,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            label_filter: Some("tree".into()),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Document {
    #[serde(default)]
    version: Option<String>,
    #[serde(default)]
    flags: serde_json::Map<String, serde_json::Value>,
    shapes: Vec<Shape>,
    image_path: String,
    #[serde(default)]
    image_data: Option<String>,
    #[serde(default)]
    image_height: Option<usize>,
    #[serde(default)]
    image_width: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Shape {
    label: String,
    points: Vec<[f64; 2]>,
    #[serde(default)]
    group_id: Option<i64>,
    #[serde(default = "default_shape_type")]
    shape_type: String,
    #[serde(default)]
    flags: serde_json::Map<String, serde_json::Value>,
}

fn default_shape_type() -> String {
    "polygon".into()
}

/// Parses one document. `image_id` names the tile the document labels.
pub fn parse_annotation_file(text: &str, image_id: &str, opts: &ParseOptions) -> Result<AnnotationFile> {
    let doc: Document =
        serde_json::from_str(text).map_err(|e| Error::json(format!("annotation {image_id}"), &e))?;
    let width = doc.image_width.unwrap_or(TILE_SIZE);
    let height = doc.image_height.unwrap_or(TILE_SIZE);
    let mut out = AnnotationFile {
        image_id: image_id.to_string(),
        image_path: doc.image_path,
        width,
        height,
        annotations: Vec::new(),
        warnings: Vec::new(),
        rejected: Vec::new(),
        filtered: 0,
    };
    for (index, shape) in doc.shapes.iter().enumerate() {
        if shape.shape_type != "polygon" {
            out.warnings.push(format!(
                "shape {index}: skipped non-polygon shape_type {:?}",
                shape.shape_type
            ));
            continue;
        }
        if let Some(want) = &opts.label_filter {
            if &shape.label != want {
                out.filtered += 1;
                continue;
            }
        }
        match PolygonAnnotation::new(&shape.label, &shape.points, image_id, width as f64, height as f64) {
            Ok(a) => out.annotations.push(a),
            Err(reason) => out.rejected.push(RejectedShape { index, reason }),
        }
    }
    Ok(out)
}

/// Serializes polygons as a LabelMe document.
pub fn to_labelme_json(image_path: &str, width: usize, height: usize, polygons: &[(String, Vec<Point>)]) -> String {
    let doc = Document {
        version: Some("5.2.1".into()),
        flags: Default::default(),
        shapes: polygons
            .iter()
            .map(|(label, pts)| Shape {
                label: label.clone(),
                points: pts.clone(),
                group_id: None,
                shape_type: "polygon".into(),
                flags: Default::default(),
            })
            .collect(),
        image_path: image_path.to_string(),
        image_data: None,
        image_height: Some(height),
        image_width: Some(width),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("document serializes");
    s.push('\n');
    s
}

/// Every `*.json` file under `dir`, as `(image id, path)` sorted by id. The
/// id is the path relative to `dir` without extension, `/`-separated.
pub fn list_annotation_files(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, PathBuf)>) -> Result<()> {
        let rd = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in rd {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            let path = entry.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else if path.extension().is_some_and(|e| e == "json") {
                if path.file_name().is_some_and(|n| n == "manifest.json") {
                    continue;
                }
                let rel = path.strip_prefix(root).expect("under root").with_extension("");
                let id = rel
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy().into_owned())
                    .collect::<Vec<_>>()
                    .join("/");
                out.push((id, path));
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out)?;
    out.sort();
    Ok(out)
}

pub fn load_annotation_dir(dir: &Path, opts: &ParseOptions) -> Result<Vec<AnnotationFile>> {
    list_annotation_files(dir)?
        .into_iter()
        .map(|(id, path)| {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            parse_annotation_file(&text, &id, opts)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_triangle() {
        let doc = r#"{"shapes":[{"label":"tree","points":[[1,1],[10,1],[5,8]],"shape_type":"polygon"}],
                      "imagePath":"a.png","imageWidth":512,"imageHeight":512}"#;
        let f = parse_annotation_file(doc, "a", &ParseOptions::default()).unwrap();
        assert_eq!(f.annotations.len(), 1);
        assert_eq!(f.annotations[0].vertices.len(), 3);
        assert!(f.warnings.is_empty());
    }

    #[test]
    fn line_shape_is_a_warning() {
        let doc = r#"{"shapes":[{"label":"tree","points":[[1,1],[10,1]],"shape_type":"line"}],"imagePath":"a.png"}"#;
        let f = parse_annotation_file(doc, "a", &ParseOptions::default()).unwrap();
        assert_eq!(f.annotations.len(), 0);
        assert_eq!(f.warnings.len(), 1);
    }

    #[test]
    fn short_polygon_is_rejected_not_fatal() {
        let doc = r#"{"shapes":[{"label":"tree","points":[[1,1],[10,1]]},
                                {"label":"tree","points":[[0,0],[4,4],[4,0],[0,4]]},
                                {"label":"tree","points":[[0,0],[4,0],[4,4]]}],"imagePath":"a.png"}"#;
        let f = parse_annotation_file(doc, "a", &ParseOptions::default()).unwrap();
        assert_eq!(f.annotations.len(), 1);
        assert_eq!(f.rejected.len(), 2);
        assert_eq!(f.rejected[0].index, 0);
        assert!(f.rejected[1].reason.contains("self-intersecting"));
    }

    #[test]
    fn duplicate_vertices_are_cleaned() {
        let doc = r#"{"shapes":[{"label":"tree","points":[[0,0],[4,0],[4,0],[4,4],[0,0]]}],"imagePath":"a.png"}"#;
        let f = parse_annotation_file(doc, "a", &ParseOptions::default()).unwrap();
        assert_eq!(f.annotations[0].vertices, vec![[0.0, 0.0], [4.0, 0.0], [4.0, 4.0]]);
    }

    #[test]
    fn label_filter_and_out_of_frame() {
        let doc = r#"{"shapes":[{"label":"building","points":[[0,0],[4,0],[4,4]]},
                                {"label":"tree","points":[[0,0],[600,0],[4,4]]}],"imagePath":"a.png"}"#;
        let f = parse_annotation_file(doc, "a", &ParseOptions::default()).unwrap();
        assert_eq!(f.filtered, 1);
        assert_eq!(f.rejected.len(), 1);
        let all = ParseOptions { label_filter: None };
        let f = parse_annotation_file(doc, "a", &all).unwrap();
        assert_eq!(f.annotations.len(), 1);
    }

    #[test]
    fn malformed_document_reports_position() {
        let err = parse_annotation_file("{\n \"shapes\": [\n  {\"label\": }", "a", &ParseOptions::default())
            .unwrap_err();
        match err {
            Error::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert!(column > 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn writer_round_trips() {
        let polys = vec![("tree".to_string(), vec![[1.5, 2.0], [9.0, 2.0], [4.0, 7.25]])];
        let text = to_labelme_json("t.png", 512, 512, &polys);
        let f = parse_annotation_file(&text, "t", &ParseOptions::default()).unwrap();
        assert_eq!(f.annotations[0].vertices, polys[0].1);
    }
}
