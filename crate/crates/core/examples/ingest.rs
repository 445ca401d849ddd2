//! Georeference per-tile detections and merge duplicates and seam fragments
//! into scene-level tree instances.
//!
//!     cargo run --example ingest

use canopy_delta::detections::{
    assemble_scene_with, detections_json, georeference_all, parse_detections, AssembleOptions,
};
use canopy_delta::raster::{tile_scene, TilingOptions};
use canopy_delta::synthgen::{generate_scene, simulate_detector, DetectorModel, SynthSpec};

fn main() -> canopy_delta::Result<()> {
    let mut spec = SynthSpec::demo(2);
    spec.tree_count = 60;
    let scene = generate_scene(&spec)?;
    let tmp = tempfile::tempdir().expect("temp dir");
    let tiles = tile_scene(&scene.epochs[0].scene, &TilingOptions::new(18), tmp.path())?;

    // Detector output round-trips through the results-file format.
    let text = detections_json(&simulate_detector(&scene, 0, &DetectorModel::perfect())?);
    let parsed = parse_detections(&text)?;
    let placed = georeference_all(&parsed.detections, &tiles.manifest, "2011")?;

    for merge in [false, true] {
        let opts = AssembleOptions { merge_seam_fragments: merge, ..Default::default() };
        let trees = assemble_scene_with(&placed, &opts)?;
        println!(
            "{} detections -> {} instances (seam merge {}), {} planted trees",
            placed.len(),
            trees.len(),
            if merge { "on" } else { "off" },
            scene.epochs[0].trees.len()
        );
    }
    Ok(())
}
