//! Cut a small synthetic scene into 512 px web-mercator tiles and print the manifest.
//!
//!     cargo run --example tiling

use canopy_delta::raster::{tile_bounds, tile_scene, TilingOptions};
use canopy_delta::synthgen::{generate_scene, SynthSpec};

fn main() -> canopy_delta::Result<()> {
    let mut spec = SynthSpec::demo(1);
    spec.tree_count = 40;
    let scene = generate_scene(&spec)?;
    let image = &scene.epochs[0].scene;
    println!(
        "scene {}x{} px at {:.2} m, EPSG:{}",
        image.descriptor.width, image.descriptor.height, image.descriptor.nominal_gsd, image.descriptor.transform.epsg
    );

    let out = tempfile::tempdir().expect("temp dir");
    let result = tile_scene(image, &TilingOptions::new(18), out.path())?;
    for entry in &result.manifest {
        let t = entry.tile()?;
        let b = tile_bounds(t);
        println!("{t}  lon {:.6}..{:.6}  lat {:.6}..{:.6}", b.west, b.east, b.south, b.north);
    }
    println!("{} tiles, manifest at {}", result.manifest.len(), result.manifest_path.display());
    Ok(())
}
