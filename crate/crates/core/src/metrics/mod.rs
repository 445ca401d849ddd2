//! Evaluation engine: box and mask IoU, greedy prediction/ground-truth
//! matching, precision, recall, average precision and mAP.

pub mod ap;
pub mod eval;
pub mod inputs;
pub mod iou;
pub mod matching;

pub use ap::{average_precision, mean_average_precision, Interpolation, PrCurve, PrPoint};
pub use eval::{evaluate, map_range, EvalConfig, EvalImage, EvalSummary, GroundTruth, IouKind, Prediction};
pub use inputs::{eval_inputs, EvalInputs};
pub use iou::{iou_box, iou_mask, BoxXywh};
pub use matching::{match_instances, precision, recall, Assignment, MatchCounts, Ratio};
