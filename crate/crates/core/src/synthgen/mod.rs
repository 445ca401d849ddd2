//! Synthetic scenes with known ground truth and change ledger.

pub mod check;
pub mod detector;
pub mod scene;
pub mod spec;
pub mod write;

pub use check::{check_against_ledger, LedgerCheck, LEDGER_TOLERANCE_M};
pub use detector::simulate_detector;
pub use scene::{disk_ring, generate_scene, EpochData, Fate, Ledger, LedgerTree, RegionTally, SynthScene, TreeState, TruthPiece, TruthTree};
pub use spec::{DetectorModel, EditPlan, EpochSpec, LonLatBox, ScoreModel, SynthSpec};
pub use write::{write_synth, EpochPaths, SynthPaths};

use crate::error::Result;

/// Generates the scene and simulated detections, then writes everything under `root`.
pub fn synthesize(spec: &SynthSpec, root: &std::path::Path) -> Result<(SynthScene, SynthPaths)> {
    let scene = generate_scene(spec)?;
    let dets = (0..scene.epochs.len())
        .map(|k| simulate_detector(&scene, k, &spec.detector))
        .collect::<Result<Vec<_>>>()?;
    let paths = write_synth(&scene, &dets, root)?;
    Ok((scene, paths))
}
