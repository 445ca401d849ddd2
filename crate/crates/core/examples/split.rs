//! Seeded 70/20/10 split of tile ids.
//!
//!     cargo run --example split

use canopy_delta::annotations::split_dataset;

fn main() -> canopy_delta::Result<()> {
    let ids: Vec<String> = (0..23).map(|i| format!("18/{}/{}", 185_000 + i % 5, 114_000 + i / 5)).collect();
    for seed in [7, 7, 8] {
        let s = split_dataset(&ids, (0.7, 0.2, 0.1), seed)?;
        println!("seed {seed}: sizes {:?}, test = {:?}", s.sizes(), s.test);
    }
    Ok(())
}
