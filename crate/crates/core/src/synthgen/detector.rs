//! Simulated detector output for a synthetic epoch.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Binomial, Distribution, Normal};

use crate::detections::DetectionRecord;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::metrics::BoxXywh;
use crate::raster::tile::tile_span_m;
use crate::raster::{TileIndex, TILE_SIZE};
use crate::synthgen::scene::{disk_ring, stream, tile_pieces, SynthScene, OUTLINE_VERTICES, STREAM_DETECTOR};
use crate::synthgen::spec::{DetectorModel, ScoreModel};

pub const DETECTION_LABEL: &str = "tree";

fn draw_score(rng: &mut ChaCha8Rng, model: &ScoreModel) -> f64 {
    match *model {
        ScoreModel::Constant { value } => value,
        ScoreModel::Uniform { low, high } => rng.random_range(low..=high),
        ScoreModel::Beta { alpha, beta } => Beta::new(alpha, beta).expect("validated beta").sample(rng),
    }
}

fn records_for(
    ring_m: &[Point],
    scene: &SynthScene,
    plan: &BTreeSet<TileIndex>,
    score: f64,
    key: &str,
    out: &mut Vec<(TileIndex, String, DetectionRecord)>,
) -> Result<()> {
    for (tile, polygon) in tile_pieces(ring_m, scene.crs, scene.spec.zoom, plan)? {
        let b = BoxXywh::enclosing(&polygon).expect("non-empty piece");
        out.push((
            tile,
            key.to_string(),
            DetectionRecord {
                tile: tile.to_string(),
                label: DETECTION_LABEL.into(),
                score,
                bbox: [b.x, b.y, b.w, b.h],
                polygon,
            },
        ));
    }
    Ok(())
}

/// Detector output for `epoch` (0 or 1), one record per tile piece of each
/// detected crown, sorted by tile then source.
///
/// Every tree consumes the same draws whether or not it is missed, so
/// changing the miss rate does not reshuffle the scores of the others.
pub fn simulate_detector(scene: &SynthScene, epoch: usize, model: &DetectorModel) -> Result<Vec<DetectionRecord>> {
    model.validate()?;
    let data = scene
        .epochs
        .get(epoch)
        .ok_or_else(|| Error::Validation(format!("epoch index {epoch} out of range")))?;
    let mut rng = stream(scene.spec.seed, STREAM_DETECTOR[epoch]);
    let plan: BTreeSet<TileIndex> = scene.tiles.iter().copied().collect();

    let lat = scene.crs.to_lonlat(scene.transform.origin_x, scene.transform.origin_y)[1];
    let tile_px_m = tile_span_m(scene.spec.zoom) / TILE_SIZE as f64 * lat.to_radians().cos();
    let noise = (model.boundary_noise_px > 0.0).then(|| Normal::new(0.0, model.boundary_noise_px * tile_px_m).expect("finite noise"));

    let mut out = Vec::new();
    for t in &data.trees {
        let missed = rng.random::<f64>() < model.miss_rate;
        let score = draw_score(&mut rng, &model.score);
        let radii: Option<Vec<f64>> = noise.map(|n| {
            (0..OUTLINE_VERTICES)
                .map(|_| (t.radius_m + n.sample(&mut rng)).max(0.3 * t.radius_m))
                .collect()
        });
        if missed {
            continue;
        }
        let ring = disk_ring(t.center_m, t.radius_m, radii.as_deref());
        records_for(&ring, scene, &plan, score, &t.id, &mut out)?;
    }

    let n_fp = Binomial::new(data.trees.len() as u64, model.false_positive_rate)
        .map_err(|e| Error::Config(format!("false positive rate: {e}")))?
        .sample(&mut rng);
    let ext = scene.extent_m();
    let [rmin, rmax] = scene.spec.crown_radius_m;
    for k in 0..n_fp {
        for _ in 0..1000 {
            let r = rng.random_range(rmin..=rmax);
            let c = [
                rng.random_range(ext.min_x + r + 1.0..ext.max_x - r - 1.0),
                rng.random_range(ext.min_y + r + 1.0..ext.max_y - r - 1.0),
            ];
            let clear = data.trees.iter().all(|t| {
                let d = r + t.radius_m + 1.0;
                (c[0] - t.center_m[0]).powi(2) + (c[1] - t.center_m[1]).powi(2) >= d * d
            });
            if clear {
                let score = draw_score(&mut rng, &model.score);
                records_for(&disk_ring(c, r, None), scene, &plan, score, &format!("fp{k:05}"), &mut out)?;
                break;
            }
        }
    }

    out.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
    Ok(out.into_iter().map(|(_, _, r)| r).collect())
}
