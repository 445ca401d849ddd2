use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// True/false positive bookkeeping at one IoU threshold and score cutoff.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl MatchCounts {
    pub fn add(&mut self, other: &MatchCounts) {
        self.true_positives += other.true_positives;
        self.false_positives += other.false_positives;
        self.false_negatives += other.false_negatives;
    }
}

/// A ratio that may have had a zero denominator; `undefined` is set in that
/// case and `value` is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub value: f64,
    pub undefined: bool,
}

fn ratio(num: usize, den: usize) -> Ratio {
    if den == 0 {
        Ratio {
            value: 0.0,
            undefined: true,
        }
    } else {
        Ratio {
            value: num as f64 / den as f64,
            undefined: false,
        }
    }
}

/// TP / (TP + FP).
pub fn precision(c: &MatchCounts) -> Ratio {
    ratio(c.true_positives, c.true_positives + c.false_positives)
}

/// TP / (TP + FN).
pub fn recall(c: &MatchCounts) -> Ratio {
    ratio(c.true_positives, c.true_positives + c.false_negatives)
}

/// Outcome of greedy matching on one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Ground-truth index claimed by each prediction (input order).
    pub matched_gt: Vec<Option<usize>>,
    pub counts: MatchCounts,
}

/// Prediction indices by descending score; equal scores keep input order.
pub fn score_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Greedy one-to-one matching: predictions in descending score claim the
/// still-unmatched ground truth with the highest IoU at or above
/// `threshold` (lowest index on ties).
///
/// `iou[p][g]` is the overlap of prediction `p` with ground truth `g`.
pub fn match_instances(scores: &[f64], iou: &[Vec<f64>], n_gt: usize, threshold: f64) -> Result<Assignment> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Domain(format!("IoU threshold {threshold} outside (0, 1]")));
    }
    if iou.len() != scores.len() || iou.iter().any(|row| row.len() != n_gt) {
        return Err(Error::Validation("IoU matrix shape does not match inputs".into()));
    }
    let mut taken = vec![false; n_gt];
    let mut matched_gt = vec![None; scores.len()];
    let mut counts = MatchCounts::default();
    for p in score_order(scores) {
        let mut best: Option<(usize, f64)> = None;
        for (g, &v) in iou[p].iter().enumerate() {
            if taken[g] || v < threshold {
                continue;
            }
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((g, v));
            }
        }
        match best {
            Some((g, _)) => {
                taken[g] = true;
                matched_gt[p] = Some(g);
                counts.true_positives += 1;
            }
            None => counts.false_positives += 1,
        }
    }
    counts.false_negatives = n_gt - counts.true_positives;
    Ok(Assignment { matched_gt, counts })
}
