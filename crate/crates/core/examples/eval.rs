//! Box and mask mAP of a noisy simulated detector against tile annotations.
//!
//!     cargo run --example eval

use canopy_delta::annotations::labelme::load_annotation_dir;
use canopy_delta::annotations::ParseOptions;
use canopy_delta::detections::parse_detections;
use canopy_delta::metrics::eval::coco_thresholds;
use canopy_delta::metrics::{eval_inputs, evaluate, EvalConfig, Interpolation};
use canopy_delta::synthgen::{synthesize, DetectorModel, ScoreModel, SynthSpec};

fn main() -> canopy_delta::Result<()> {
    let mut spec = SynthSpec::demo(3);
    spec.detector = DetectorModel {
        score: ScoreModel::Beta { alpha: 5.0, beta: 2.0 },
        miss_rate: 0.15,
        false_positive_rate: 0.1,
        boundary_noise_px: 1.5,
    };
    let tmp = tempfile::tempdir().expect("temp dir");
    let (_, paths) = synthesize(&spec, tmp.path())?;
    let ep = &paths.epochs[0];

    let gt = load_annotation_dir(&ep.tile_annotations, &ParseOptions::default())?;
    let dets = parse_detections(&std::fs::read_to_string(&ep.detections).expect("detections"))?;
    let inputs = eval_inputs(&gt, &dets.detections);
    let cfg = EvalConfig { thresholds: coco_thresholds(), interpolation: Interpolation::Coco101 };
    let s = evaluate(&inputs.images, &cfg)?;

    println!("{} images, {} ground truth, {} predictions", s.images, s.ground_truth, s.predictions);
    let mask = s.mask.as_ref().expect("polygons give masks");
    println!("IoU    box mAP  mask mAP");
    for (b, m) in s.box_metrics.per_threshold.iter().zip(&mask.per_threshold) {
        println!("{:.2}   {:.4}   {:.4}", b.iou, b.map.unwrap_or(f64::NAN), m.map.unwrap_or(f64::NAN));
    }
    println!("mAP@[.5:.95]  box {:.4}  mask {:.4}", s.box_metrics.map_range.unwrap(), mask.map_range.unwrap());
    Ok(())
}
