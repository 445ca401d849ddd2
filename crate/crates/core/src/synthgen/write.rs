//! On-disk layout of a synthetic scene.

use std::fs;
use std::path::{Path, PathBuf};

use crate::annotations::labelme::to_labelme_json;
use crate::changedet::regions_to_geojson;
use crate::detections::{detections_json, DetectionRecord};
use crate::error::{Error, Result};
use crate::synthgen::scene::{disk_ring, SynthScene};

pub const LEDGER_FILE: &str = "ledger.json";
pub const REGIONS_FILE: &str = "regions.geojson";
pub const SPEC_FILE: &str = "spec.json";
pub const SCENE_STEM: &str = "scene";
pub const ANNOTATIONS_FILE: &str = "annotations.json";
pub const TILE_ANNOTATIONS_DIR: &str = "tile_annotations";
pub const DETECTIONS_FILE: &str = "detections.json";

/// Paths written for one epoch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpochPaths {
    pub dir: PathBuf,
    pub scene_raw: PathBuf,
    pub scene_json: PathBuf,
    pub annotations: PathBuf,
    pub tile_annotations: PathBuf,
    pub detections: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthPaths {
    pub root: PathBuf,
    pub ledger: PathBuf,
    pub regions: PathBuf,
    pub spec: PathBuf,
    pub epochs: Vec<EpochPaths>,
}

fn put(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the scene, truth, ledger and the given per-epoch detections.
pub fn write_synth(scene: &SynthScene, detections: &[Vec<DetectionRecord>], root: &Path) -> Result<SynthPaths> {
    if detections.len() != scene.epochs.len() {
        return Err(Error::Validation(format!(
            "expected detections for {} epochs, got {}",
            scene.epochs.len(),
            detections.len()
        )));
    }
    let paths = SynthPaths {
        root: root.to_path_buf(),
        ledger: root.join(LEDGER_FILE),
        regions: root.join(REGIONS_FILE),
        spec: root.join(SPEC_FILE),
        epochs: Vec::new(),
    };
    put(&paths.spec, &scene.spec.to_json())?;
    put(&paths.ledger, &scene.ledger.to_json())?;
    put(&paths.regions, &regions_to_geojson(&scene.regions).to_json())?;

    let mut paths = paths;
    for (data, dets) in scene.epochs.iter().zip(detections) {
        let dir = root.join(&data.tag);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let (scene_raw, scene_json) = data.scene.write(&dir.join(SCENE_STEM))?;

        let polys: Vec<_> = data
            .trees
            .iter()
            .map(|t| ("tree".to_string(), scene.scene_pixels(&disk_ring(t.center_m, t.radius_m, None))))
            .collect();
        let raw_name = scene_raw.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let annotations = dir.join(ANNOTATIONS_FILE);
        put(&annotations, &to_labelme_json(&raw_name, scene.width, scene.height, &polys))?;

        let tile_dir = dir.join(TILE_ANNOTATIONS_DIR);
        for (tile, pieces) in &data.tile_annotations {
            let polys: Vec<_> = pieces.iter().map(|p| ("tree".to_string(), p.polygon.clone())).collect();
            let path = tile_dir.join(format!("{}/{}/{}.json", tile.z, tile.x, tile.y));
            let image = format!("{}/{}/{}.png", tile.z, tile.x, tile.y);
            put(&path, &to_labelme_json(&image, crate::raster::TILE_SIZE, crate::raster::TILE_SIZE, &polys))?;
        }

        let det_path = dir.join(DETECTIONS_FILE);
        put(&det_path, &detections_json(dets))?;
        paths.epochs.push(EpochPaths {
            dir,
            scene_raw,
            scene_json,
            annotations,
            tile_annotations: tile_dir,
            detections: det_path,
        });
    }
    Ok(paths)
}
