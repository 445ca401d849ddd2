//! Dataset-level evaluation: per-image greedy matching at every IoU
//! threshold, pooled precision-recall curves per class, AP and mAP for both
//! box and mask overlap.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotations::InstanceMask;
use crate::error::{Error, Result};
use crate::metrics::ap::{average_precision, mean_average_precision, Interpolation, PrCurve};
use crate::metrics::iou::{iou_box, iou_mask, BoxXywh};
use crate::metrics::matching::{match_instances, precision, recall, MatchCounts, Ratio};

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub class: String,
    pub bbox: BoxXywh,
    pub mask: Option<InstanceMask>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: String,
    pub score: f64,
    pub bbox: BoxXywh,
    pub mask: Option<InstanceMask>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalImage {
    pub image_id: String,
    pub ground_truth: Vec<GroundTruth>,
    pub predictions: Vec<Prediction>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IouKind {
    Box,
    Mask,
}

/// The ten thresholds 0.50, 0.55, ..., 0.95.
pub fn coco_thresholds() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

/// Parses `0.5`, `0.5:0.95` (step 0.05) or `lo:step:hi`.
pub fn parse_threshold_spec(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Validation(format!("invalid IoU threshold spec {spec:?}"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let (lo, step, hi) = match parts.as_slice() {
        [v] => (*v, 0.05, *v),
        [lo, hi] => (*lo, 0.05, *hi),
        [lo, step, hi] => (*lo, *step, *hi),
        _ => return Err(bad()),
    };
    if !(lo > 0.0 && hi <= 1.0 && lo <= hi && step > 0.0) {
        return Err(bad());
    }
    // Integer hundredths keep 0.55 etc. exact.
    let (lo_c, step_c, hi_c) = ((lo * 100.0).round() as i64, (step * 100.0).round() as i64, (hi * 100.0).round() as i64);
    if step_c <= 0 {
        return Err(bad());
    }
    let mut out = Vec::new();
    let mut c = lo_c;
    while c <= hi_c {
        out.push(c as f64 / 100.0);
        c += step_c;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassThreshold {
    pub iou: f64,
    /// `None` when the class has no ground truth.
    pub ap: Option<f64>,
    pub counts: MatchCounts,
    pub precision: Ratio,
    pub recall: Ratio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMap {
    pub iou: f64,
    pub map: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub kind: IouKind,
    pub per_class: BTreeMap<String, Vec<ClassThreshold>>,
    pub per_threshold: Vec<ThresholdMap>,
    pub map_50: Option<f64>,
    /// Mean over every configured threshold (headline).
    pub map_range: Option<f64>,
    /// Mean of the 0.5 and 0.95 values only.
    pub map_50_and_95: Option<f64>,
    /// TP / |GT| at IoU 0.5 with every prediction kept.
    pub detection_rate_50: Option<f64>,
    #[serde(skip)]
    pub curves: Vec<(String, PrCurve)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub thresholds: Vec<f64>,
    pub interpolation: Interpolation,
    pub images: usize,
    pub ground_truth: usize,
    pub predictions: usize,
    #[serde(rename = "box")]
    pub box_metrics: MetricSet,
    pub mask: Option<MetricSet>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub thresholds: Vec<f64>,
    pub interpolation: Interpolation,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            thresholds: coco_thresholds(),
            interpolation: Interpolation::Coco101,
        }
    }
}

/// Per (image, class) IoU matrices, built once and shared by every threshold.
struct ImageClass {
    class: String,
    scores: Vec<f64>,
    iou: Vec<Vec<f64>>,
    n_gt: usize,
}

fn overlap_tables(image: &EvalImage, kind: IouKind) -> Result<Vec<ImageClass>> {
    let classes: BTreeSet<&String> = image
        .ground_truth
        .iter()
        .map(|g| &g.class)
        .chain(image.predictions.iter().map(|p| &p.class))
        .collect();
    classes
        .into_iter()
        .map(|class| {
            let gts: Vec<&GroundTruth> = image.ground_truth.iter().filter(|g| &g.class == class).collect();
            let preds: Vec<&Prediction> = image.predictions.iter().filter(|p| &p.class == class).collect();
            let iou = preds
                .iter()
                .map(|p| {
                    gts.iter()
                        .map(|g| match kind {
                            IouKind::Box => iou_box(&p.bbox, &g.bbox),
                            IouKind::Mask => match (&p.mask, &g.mask) {
                                (Some(pm), Some(gm)) => iou_mask(pm, gm),
                                _ => Err(Error::Validation(format!(
                                    "mask evaluation needs masks on every instance ({})",
                                    image.image_id
                                ))),
                            },
                        })
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ImageClass {
                class: class.clone(),
                scores: preds.iter().map(|p| p.score).collect(),
                iou,
                n_gt: gts.len(),
            })
        })
        .collect()
}

fn evaluate_kind(images: &[EvalImage], kind: IouKind, cfg: &EvalConfig) -> Result<MetricSet> {
    let tables: Vec<Vec<ImageClass>> = images
        .par_iter()
        .map(|img| overlap_tables(img, kind))
        .collect::<Result<_>>()?;
    let classes: BTreeSet<String> = tables.iter().flatten().map(|t| t.class.clone()).collect();

    let mut per_class: BTreeMap<String, Vec<ClassThreshold>> = BTreeMap::new();
    let mut curves = Vec::new();
    for class in &classes {
        let mut rows = Vec::with_capacity(cfg.thresholds.len());
        for &tau in &cfg.thresholds {
            let mut outcomes = Vec::new();
            let mut counts = MatchCounts::default();
            let mut n_gt = 0;
            for t in tables.iter().flatten().filter(|t| &t.class == class) {
                let a = match_instances(&t.scores, &t.iou, t.n_gt, tau)?;
                counts.add(&a.counts);
                n_gt += t.n_gt;
                outcomes.extend(t.scores.iter().zip(&a.matched_gt).map(|(&s, m)| (s, m.is_some())));
            }
            let curve = PrCurve::from_outcomes(&outcomes, n_gt, tau);
            let ap = if n_gt == 0 {
                None
            } else {
                Some(average_precision(&curve, cfg.interpolation)?)
            };
            rows.push(ClassThreshold {
                iou: tau,
                ap,
                counts,
                precision: precision(&counts),
                recall: recall(&counts),
            });
            curves.push((class.clone(), curve));
        }
        per_class.insert(class.clone(), rows);
    }

    let per_threshold: Vec<ThresholdMap> = cfg
        .thresholds
        .iter()
        .enumerate()
        .map(|(k, &tau)| {
            let aps: Vec<f64> = per_class.values().filter_map(|rows| rows[k].ap).collect();
            ThresholdMap {
                iou: tau,
                map: mean_average_precision(&aps).ok(),
            }
        })
        .collect();
    let at = |tau: f64| per_threshold.iter().find(|t| (t.iou - tau).abs() < 1e-12).and_then(|t| t.map);
    let defined: Vec<f64> = per_threshold.iter().filter_map(|t| t.map).collect();
    let map_range = if defined.len() == per_threshold.len() && !defined.is_empty() {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    } else {
        None
    };
    let map_50_and_95 = match (at(0.5), at(0.95)) {
        (Some(a), Some(b)) => Some((a + b) / 2.0),
        _ => None,
    };
    let detection_rate_50 = cfg.thresholds.iter().position(|&t| (t - 0.5).abs() < 1e-12).and_then(|k| {
        let (tp, gt) = per_class.values().fold((0, 0), |(tp, gt), rows| {
            let c = rows[k].counts;
            (tp + c.true_positives, gt + c.true_positives + c.false_negatives)
        });
        (gt > 0).then(|| tp as f64 / gt as f64)
    });

    Ok(MetricSet {
        kind,
        per_class,
        map_50: at(0.5),
        map_range,
        map_50_and_95,
        detection_rate_50,
        per_threshold,
        curves,
    })
}

/// Evaluates box overlap always and mask overlap when every instance
/// carries a mask.
pub fn evaluate(images: &[EvalImage], cfg: &EvalConfig) -> Result<EvalSummary> {
    if cfg.thresholds.is_empty() {
        return Err(Error::Validation("no IoU thresholds configured".into()));
    }
    let box_metrics = evaluate_kind(images, IouKind::Box, cfg)?;
    let has_masks = images.iter().all(|img| {
        img.ground_truth.iter().all(|g| g.mask.is_some()) && img.predictions.iter().all(|p| p.mask.is_some())
    });
    let mask = if has_masks {
        Some(evaluate_kind(images, IouKind::Mask, cfg)?)
    } else {
        None
    };
    Ok(EvalSummary {
        thresholds: cfg.thresholds.clone(),
        interpolation: cfg.interpolation,
        images: images.len(),
        ground_truth: images.iter().map(|i| i.ground_truth.len()).sum(),
        predictions: images.iter().map(|i| i.predictions.len()).sum(),
        box_metrics,
        mask,
    })
}

/// mAP averaged over the ten thresholds 0.50..0.95.
pub fn map_range(images: &[EvalImage], kind: IouKind) -> Result<f64> {
    let cfg = EvalConfig::default();
    let set = evaluate_kind(images, kind, &cfg)?;
    set.map_range
        .ok_or_else(|| Error::Domain("mAP undefined: no class has ground truth".into()))
}

/// PR curves as CSV rows: `kind,class,iou,rank,score,recall,precision`.
pub fn curves_csv(summary: &EvalSummary) -> String {
    let mut out = String::from("kind,class,iou,rank,score,recall,precision\n");
    let sets = std::iter::once(&summary.box_metrics).chain(summary.mask.as_ref());
    for set in sets {
        let kind = match set.kind {
            IouKind::Box => "box",
            IouKind::Mask => "mask",
        };
        for (class, curve) in &set.curves {
            for (rank, p) in curve.points.iter().enumerate() {
                out.push_str(&format!(
                    "{kind},{class},{:.2},{},{},{},{}\n",
                    curve.iou_threshold,
                    rank + 1,
                    p.score,
                    p.recall,
                    p.precision
                ));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gt(x: f64) -> GroundTruth {
        GroundTruth {
            class: "tree".into(),
            bbox: BoxXywh::new(x, 0.0, 10.0, 10.0),
            mask: None,
        }
    }

    fn pred(x: f64, score: f64) -> Prediction {
        Prediction {
            class: "tree".into(),
            score,
            bbox: BoxXywh::new(x, 0.0, 10.0, 10.0),
            mask: None,
        }
    }

    #[test]
    fn threshold_specs() {
        assert_eq!(parse_threshold_spec("0.5:0.95").unwrap(), coco_thresholds());
        assert_eq!(parse_threshold_spec("0.5").unwrap(), vec![0.5]);
        assert_eq!(parse_threshold_spec("0.5:0.25:1.0").unwrap(), vec![0.5, 0.75, 1.0]);
        assert!(parse_threshold_spec("0:1").is_err());
        assert!(parse_threshold_spec("x").is_err());
        assert_eq!(coco_thresholds()[1], 0.55);
    }

    #[test]
    fn perfect_detector_has_unit_map() {
        let img = EvalImage {
            image_id: "a".into(),
            ground_truth: vec![gt(0.0), gt(20.0)],
            predictions: vec![pred(0.0, 0.9), pred(20.0, 0.8)],
        };
        let s = evaluate(&[img], &EvalConfig::default()).unwrap();
        assert_eq!(s.box_metrics.map_range, Some(1.0));
        assert_eq!(s.box_metrics.map_50, Some(1.0));
        assert_eq!(s.box_metrics.detection_rate_50, Some(1.0));
        assert!(s.mask.is_none());
    }

    #[test]
    fn classes_without_truth_are_excluded() {
        let mut p = pred(50.0, 0.4);
        p.class = "building".into();
        let img = EvalImage {
            image_id: "a".into(),
            ground_truth: vec![gt(0.0)],
            predictions: vec![pred(0.0, 0.9), p],
        };
        let s = evaluate(&[img], &EvalConfig::default()).unwrap();
        assert_eq!(s.box_metrics.per_class["building"][0].ap, None);
        assert_eq!(s.box_metrics.map_range, Some(1.0));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let img = EvalImage {
            image_id: "a".into(),
            ground_truth: vec![gt(0.0)],
            predictions: vec![pred(0.0, 0.9)],
        };
        let s = evaluate(&[img], &EvalConfig::default()).unwrap();
        let csv = curves_csv(&s);
        assert_eq!(csv.lines().count(), 1 + 10);
        assert!(csv.lines().nth(1).unwrap().starts_with("box,tree,0.50,1,0.9,1,1"));
    }
}
