//! Match two epochs of tree instances and report per-region change.
//!
//!     cargo run --example change

use canopy_delta::changedet::{
    match_epochs, region_report, report_csv, verdict_counts, MatchOptions, MatchStrategy,
};
use canopy_delta::detections::{assemble_scene, georeference, parse_detections, detections_json, TileFrame};
use canopy_delta::synthgen::{check_against_ledger, generate_scene, simulate_detector, SynthSpec, LEDGER_TOLERANCE_M};

fn main() -> canopy_delta::Result<()> {
    let scene = generate_scene(&SynthSpec::demo(4))?;
    let mut epochs = Vec::new();
    for (k, ep) in scene.epochs.iter().enumerate() {
        let text = detections_json(&simulate_detector(&scene, k, &scene.spec.detector)?);
        let placed = parse_detections(&text)?
            .detections
            .iter()
            .map(|d| georeference(d, &TileFrame::from_tile(d.tile, scene.crs.epsg())?, &ep.tag))
            .collect::<canopy_delta::Result<Vec<_>>>()?;
        epochs.push(assemble_scene(&placed, 0.5)?);
    }

    for strategy in [MatchStrategy::Greedy, MatchStrategy::Optimal] {
        let opts = MatchOptions { strategy, ..Default::default() };
        let records = match_epochs(&epochs[0], &epochs[1], &opts)?;
        let c = verdict_counts(&records);
        let check = check_against_ledger(&scene.ledger, &records, LEDGER_TOLERANCE_M);
        println!(
            "{:?}: persisted {}, lost {}, gained {}; ledger recovered exactly: {}",
            strategy, c.persisted, c.lost, c.gained, check.exact
        );
        if strategy == MatchStrategy::Optimal {
            print!("{}", report_csv(&region_report(&records, &scene.regions)));
        }
    }
    Ok(())
}
