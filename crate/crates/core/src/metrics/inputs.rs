//! Builds evaluation images from annotation files and detector output.

use std::collections::BTreeMap;

use crate::annotations::{AnnotationFile, InstanceMask};
use crate::detections::Detection;
use crate::metrics::eval::{EvalImage, GroundTruth, Prediction};
use crate::metrics::BoxXywh;

/// Evaluation images plus detections that fell on images without ground truth.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalInputs {
    pub images: Vec<EvalImage>,
    /// Detections whose tile has no annotation file. They are not scored.
    pub unannotated: usize,
}

/// One image per annotation file, keyed by its id. Detections are matched
/// to images by tile id (`z/x/y`). Both sides carry masks rasterized at the
/// image size.
pub fn eval_inputs(annotations: &[AnnotationFile], detections: &[Detection]) -> EvalInputs {
    let mut by_tile: BTreeMap<String, Vec<&Detection>> = BTreeMap::new();
    for d in detections {
        by_tile.entry(d.tile.to_string()).or_default().push(d);
    }
    let mut images = Vec::with_capacity(annotations.len());
    for file in annotations {
        let (w, h) = (file.width, file.height);
        let ground_truth = file
            .annotations
            .iter()
            .filter_map(|a| {
                Some(GroundTruth {
                    class: a.label.clone(),
                    bbox: BoxXywh::enclosing(&a.vertices)?,
                    mask: Some(InstanceMask::rasterize(&a.vertices, w, h, &file.image_id)),
                })
            })
            .collect();
        let predictions = by_tile
            .remove(&file.image_id)
            .unwrap_or_default()
            .into_iter()
            .map(|d| Prediction {
                class: d.label.clone(),
                score: d.score,
                bbox: d.bbox,
                mask: Some(InstanceMask::rasterize(&d.polygon, w.max(1), h.max(1), &file.image_id)),
            })
            .collect();
        images.push(EvalImage { image_id: file.image_id.clone(), ground_truth, predictions });
    }
    EvalInputs { images, unannotated: by_tile.values().map(Vec::len).sum() }
}
