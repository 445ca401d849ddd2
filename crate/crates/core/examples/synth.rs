//! Generate a two-epoch synthetic scene and write it to a directory.
//!
//!     cargo run --example synth [-- OUT_DIR]

use canopy_delta::synthgen::{synthesize, Fate, SynthSpec};

fn main() -> canopy_delta::Result<()> {
    let tmp = tempfile::tempdir().expect("temp dir");
    let root = std::env::args_os().nth(1).map(Into::into).unwrap_or_else(|| tmp.path().to_path_buf());
    let (scene, paths) = synthesize(&SynthSpec::demo(20111110), &root)?;

    let l = &scene.ledger;
    println!(
        "{} planted trees: {} persisted, {} removed, {} added",
        l.trees.len(),
        l.ids_with_fate(Fate::Persisted).len(),
        l.ids_with_fate(Fate::Removed).len(),
        l.ids_with_fate(Fate::Added).len()
    );
    for r in &l.regions {
        println!("  region {}: {} -> {}", r.region_id, r.earlier_count, r.later_count);
    }
    for ep in &paths.epochs {
        println!("wrote {}", ep.dir.display());
    }
    Ok(())
}
