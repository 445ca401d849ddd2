//! Statistical and bookkeeping checks on the synthetic scene generator.

use canopy_delta::annotations::{parse_annotation_file, ParseOptions};
use canopy_delta::detections::{assemble_scene, detections_json, georeference, parse_detections, TileFrame};
use canopy_delta::geometry::{area, centroid};
use canopy_delta::synthgen::{generate_scene, simulate_detector, synthesize, DetectorModel, SynthSpec};

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[test]
fn detector_recall_and_false_positives_follow_binomial() {
    let spec = SynthSpec::demo(424242);
    let scene = generate_scene(&spec).unwrap();
    let model = DetectorModel { miss_rate: 0.2, false_positive_rate: 0.1, ..DetectorModel::perfect() };
    let records = simulate_detector(&scene, 0, &model).unwrap();
    let dets = parse_detections(&detections_json(&records)).unwrap().detections;
    let placed: Vec<_> = dets
        .iter()
        .map(|d| georeference(d, &TileFrame::from_tile(d.tile, scene.crs.epsg()).unwrap(), "e").unwrap())
        .collect();
    let found = assemble_scene(&placed, 0.5).unwrap();

    let truth = &scene.epochs[0].trees;
    let n = truth.len() as f64;
    assert_eq!(truth.len(), 200);
    let hit = truth.iter().filter(|t| found.iter().any(|f| dist(f.centroid_m, t.center_m) < 1.0)).count();
    let fp = found.iter().filter(|f| truth.iter().all(|t| dist(f.centroid_m, t.center_m) >= 1.0)).count();

    let recall = hit as f64 / n;
    let sigma = (0.8 * 0.2 / n).sqrt();
    assert!((recall - 0.8).abs() <= 3.0 * sigma, "recall {recall} outside 0.8 +- {}", 3.0 * sigma);
    let fp_sigma = (n * 0.1 * 0.9).sqrt();
    assert!((fp as f64 - 20.0).abs() <= 3.0 * fp_sigma, "{fp} false positives");
}

#[test]
fn scene_annotations_match_planted_disks() {
    let mut spec = SynthSpec::demo(8);
    spec.tree_count = 50;
    let tmp = tempfile::tempdir().unwrap();
    let (scene, paths) = synthesize(&spec, tmp.path()).unwrap();
    let text = std::fs::read_to_string(&paths.epochs[0].annotations).unwrap();
    let file = parse_annotation_file(&text, "scene", &ParseOptions::default()).unwrap();
    assert_eq!(file.annotations.len(), 50);

    let gsd = scene.transform.pixel_width;
    for ann in &file.annotations {
        let c = centroid(&ann.vertices);
        let c_m = scene.transform.pixel_to_geo(c[0], c[1]);
        let tree = scene.epochs[0]
            .trees
            .iter()
            .min_by(|a, b| dist(a.center_m, c_m).total_cmp(&dist(b.center_m, c_m)))
            .unwrap();
        let want = std::f64::consts::PI * tree.radius_m * tree.radius_m;
        let got = area(&ann.vertices) * gsd * gsd;
        assert!((got / want - 1.0).abs() < 0.1, "{}: area {got} vs {want}", tree.id);
    }
}
