use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::matching::score_order;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub score: f64,
    pub recall: f64,
    pub precision: f64,
}

/// Precision-recall points swept over descending score cutoffs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub iou_threshold: f64,
    pub num_gt: usize,
    pub points: Vec<PrPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Envelope sampled at recall 0.00, 0.01, ..., 1.00.
    #[default]
    Coco101,
    /// Exact area under the precision envelope.
    AllPoint,
}

impl PrCurve {
    /// Builds the curve from `(score, is_true_positive)` outcomes pooled over
    /// images. Equal scores keep input order.
    pub fn from_outcomes(outcomes: &[(f64, bool)], num_gt: usize, iou_threshold: f64) -> PrCurve {
        let scores: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
        let (mut tp, mut fp) = (0usize, 0usize);
        let mut points = Vec::with_capacity(outcomes.len());
        for i in score_order(&scores) {
            if outcomes[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            points.push(PrPoint {
                score: outcomes[i].0,
                recall: if num_gt == 0 { 0.0 } else { tp as f64 / num_gt as f64 },
                precision: tp as f64 / (tp + fp) as f64,
            });
        }
        PrCurve {
            iou_threshold,
            num_gt,
            points,
        }
    }

    /// Running maximum of precision from the right.
    fn envelope(&self) -> Vec<f64> {
        let mut env: Vec<f64> = self.points.iter().map(|p| p.precision).collect();
        for i in (0..env.len().saturating_sub(1)).rev() {
            env[i] = env[i].max(env[i + 1]);
        }
        env
    }
}

pub fn average_precision(curve: &PrCurve, method: Interpolation) -> Result<f64> {
    if curve.num_gt == 0 {
        return Err(Error::Domain("average precision is undefined without ground truth".into()));
    }
    let env = curve.envelope();
    let recalls: Vec<f64> = curve.points.iter().map(|p| p.recall).collect();
    let ap = match method {
        Interpolation::Coco101 => {
            let mut sum = 0.0;
            let mut k = 0;
            for i in 0..=100 {
                let r = i as f64 / 100.0;
                // recall is non-decreasing: advance to the first point reaching r.
                while k < recalls.len() && recalls[k] < r {
                    k += 1;
                }
                if k < recalls.len() {
                    sum += env[k];
                }
            }
            sum / 101.0
        }
        Interpolation::AllPoint => {
            let mut prev = 0.0;
            let mut area = 0.0;
            for (i, &r) in recalls.iter().enumerate() {
                area += (r - prev) * env[i];
                prev = r;
            }
            area
        }
    };
    Ok(ap.clamp(0.0, 1.0))
}

/// Arithmetic mean over classes with a defined AP.
pub fn mean_average_precision(per_class: &[f64]) -> Result<f64> {
    if per_class.is_empty() {
        return Err(Error::Domain("mAP needs at least one class with a defined AP".into()));
    }
    Ok(per_class.iter().sum::<f64>() / per_class.len() as f64)
}
