//! Cuts a georeferenced scene into 512x512 web-mercator XYZ tiles.
//!
//! Each output pixel centre is mapped mercator -> lon/lat -> scene CRS ->
//! scene pixel and sampled nearest-neighbour; pixels that fall outside the
//! scene receive the nodata value.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Bbox, Point};
use crate::raster::crs::{lonlat_to_mercator, Crs, MERCATOR_HALF_WORLD};
use crate::raster::pngio::write_png_8bit;
use crate::raster::scene::{encode_samples, Scene, SceneDescriptor};
use crate::raster::stretch::Stretch;
use crate::raster::tile::{tile_bounds, GeoBounds, TileIndex, MAX_MERCATOR_LAT, MAX_ZOOM, TILE_SIZE};

pub const NODATA: u16 = 0;
pub const MANIFEST_FILE: &str = "manifest.json";
const DEFAULT_U16_STRETCH: (f64, f64) = (2.0, 98.0);

#[derive(Debug, Clone, PartialEq)]
pub struct TilingOptions {
    pub zoom: u8,
    /// Percentile cut points for the 8-bit view. `None` passes u8 scenes
    /// through unchanged and applies 2/98 to u16 scenes.
    pub stretch: Option<(f64, f64)>,
    pub write_raw: bool,
}

impl TilingOptions {
    pub fn new(zoom: u8) -> Self {
        TilingOptions {
            zoom,
            stretch: None,
            write_raw: false,
        }
    }
}

/// One row of `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub z: u8,
    pub x: u32,
    pub y: u32,
    pub path: String,
    /// `[west, south, east, north]`, degrees.
    pub bounds: GeoBounds,
    pub nodata: u16,
    /// Metric CRS used for areas and distances of anything detected on this tile.
    pub projected_epsg: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_path: Option<String>,
}

impl ManifestEntry {
    pub fn tile(&self) -> Result<TileIndex> {
        TileIndex::new(self.z, self.x, self.y)
    }
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), &e))
}

pub fn manifest_json(entries: &[ManifestEntry]) -> String {
    let mut s = serde_json::to_string_pretty(entries).expect("manifest serializes");
    s.push('\n');
    s
}

/// A rendered tile, band-sequential.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterTile {
    pub index: TileIndex,
    pub band_count: usize,
    pub samples: Vec<u16>,
    pub bounds: GeoBounds,
}

impl RasterTile {
    pub fn band(&self, b: usize) -> &[u16] {
        let n = TILE_SIZE * TILE_SIZE;
        &self.samples[b * n..(b + 1) * n]
    }
}

/// Metric CRS used for a scene's measurements: its own CRS when that is
/// UTM, otherwise the UTM zone of the scene centre.
pub fn projected_crs(desc: &SceneDescriptor) -> Result<Crs> {
    let crs = desc.transform.crs()?;
    if crs.is_metric() {
        return Ok(crs);
    }
    let c = desc
        .transform
        .pixel_to_geo(desc.width as f64 / 2.0, desc.height as f64 / 2.0);
    let [lon, lat] = crs.to_lonlat(c[0], c[1]);
    Ok(Crs::utm_for(lon, lat))
}

/// Footprint in continuous tile coordinates at `zoom` (x right, y down).
fn footprint_tile_coords(desc: &SceneDescriptor, zoom: u8) -> Result<Vec<Point>> {
    let n = (1u64 << zoom) as f64;
    let span = 2.0 * MERCATOR_HALF_WORLD;
    let crs = desc.transform.crs()?;
    let corners = desc.corners();
    let to_tile = |mx: f64, my: f64| -> Point {
        [(mx + MERCATOR_HALF_WORLD) / span * n, (MERCATOR_HALF_WORLD - my) / span * n]
    };
    let mut ring = Vec::new();
    let per_edge = if crs == Crs::WebMercator { 1 } else { 64 };
    for k in 0..4 {
        let a = corners[k];
        let b = corners[(k + 1) % 4];
        for s in 0..per_edge {
            let t = s as f64 / per_edge as f64;
            let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            let m = if crs == Crs::WebMercator {
                p
            } else {
                let [lon, lat] = crs.to_lonlat(p[0], p[1]);
                if !(lat.abs() <= MAX_MERCATOR_LAT) || !(-180.0..=180.0).contains(&lon) {
                    return Err(Error::Domain(format!(
                        "scene corner ({lon}, {lat}) outside the web-mercator bound of ±{MAX_MERCATOR_LAT}°"
                    )));
                }
                lonlat_to_mercator(lon, lat)
            };
            ring.push(to_tile(m[0], m[1]));
        }
    }
    Ok(ring)
}

/// Every tile at `zoom` whose interior intersects the scene footprint,
/// sorted by `(z, x, y)`.
pub fn plan_tiles(desc: &SceneDescriptor, zoom: u8) -> Result<Vec<TileIndex>> {
    if zoom > MAX_ZOOM {
        return Err(Error::Domain(format!("zoom {zoom} exceeds maximum {MAX_ZOOM}")));
    }
    desc.validate()?;
    let ring = footprint_tile_coords(desc, zoom)?;
    let bb = Bbox::of(&ring).expect("non-empty ring");
    let max = (1u64 << zoom) as f64 - 1.0;
    let eps = 1e-9;
    let x0 = (bb.min_x + eps).floor().clamp(0.0, max) as u32;
    let x1 = ((bb.max_x - eps).ceil() - 1.0).clamp(0.0, max) as u32;
    let y0 = (bb.min_y + eps).floor().clamp(0.0, max) as u32;
    let y1 = ((bb.max_y - eps).ceil() - 1.0).clamp(0.0, max) as u32;
    let mut out = Vec::new();
    for x in x0..=x1 {
        for y in y0..=y1 {
            let rect = Bbox {
                min_x: x as f64 + eps,
                min_y: y as f64 + eps,
                max_x: x as f64 + 1.0 - eps,
                max_y: y as f64 + 1.0 - eps,
            };
            if geometry::ring_intersects_rect(&ring, &rect) {
                out.push(TileIndex { z: zoom, x, y });
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Domain(format!("zoom {zoom} produces zero tiles for this scene")));
    }
    Ok(out)
}

/// Renders one tile by nearest-neighbour lookup of each pixel centre.
pub fn render_tile(scene: &Scene, index: TileIndex) -> Result<RasterTile> {
    let desc = &scene.descriptor;
    let crs = desc.transform.crs()?;
    let gt = index.geotransform();
    let n = TILE_SIZE * TILE_SIZE;
    let mut samples = vec![NODATA; n * desc.band_count];
    let (w, h) = (desc.width as f64, desc.height as f64);
    for row in 0..TILE_SIZE {
        let my = gt.origin_y + (row as f64 + 0.5) * gt.pixel_height;
        for col in 0..TILE_SIZE {
            let mx = gt.origin_x + (col as f64 + 0.5) * gt.pixel_width;
            let p = match crs {
                Crs::WebMercator => [mx, my],
                _ => {
                    let [lon, lat] = crate::raster::crs::mercator_to_lonlat(mx, my);
                    crs.from_lonlat(lon, lat)
                }
            };
            let [fc, fr] = desc.transform.geo_to_pixel(p[0], p[1])?;
            if fc >= 0.0 && fr >= 0.0 && fc < w && fr < h {
                let (c, r) = (fc as usize, fr as usize);
                for b in 0..desc.band_count {
                    samples[b * n + row * TILE_SIZE + col] = scene.sample(b, c, r);
                }
            }
        }
    }
    Ok(RasterTile {
        index,
        band_count: desc.band_count,
        samples,
        bounds: tile_bounds(index),
    })
}

#[derive(Debug, Clone)]
pub struct TilingResult {
    pub manifest: Vec<ManifestEntry>,
    pub manifest_path: PathBuf,
}

fn band_stretches(scene: &Scene, opts: &TilingOptions) -> Result<Vec<Option<Stretch>>> {
    use crate::raster::scene::SampleType;
    let view_bands = if scene.descriptor.band_count >= 3 { 3 } else { 1 };
    let cut = match (opts.stretch, scene.descriptor.sample_type) {
        (Some(c), _) => Some(c),
        (None, SampleType::U16) => Some(DEFAULT_U16_STRETCH),
        (None, SampleType::U8) => None,
    };
    (0..view_bands)
        .map(|b| match cut {
            Some((lo, hi)) => Stretch::from_samples(scene.band(b), lo, hi).map(Some),
            None => Ok(None),
        })
        .collect()
}

/// Tiles the scene into `out_dir/{z}/{x}/{y}.png` (plus optional `.raw`
/// payloads) and writes `manifest.json`. Runs on the current rayon pool;
/// output is independent of the schedule.
pub fn tile_scene(scene: &Scene, opts: &TilingOptions, out_dir: &Path) -> Result<TilingResult> {
    let desc = &scene.descriptor;
    let tiles = plan_tiles(desc, opts.zoom)?;
    let projected_epsg = projected_crs(desc)?.epsg();
    let stretches = band_stretches(scene, opts)?;
    let view_bands = stretches.len();

    let entries: Vec<ManifestEntry> = tiles
        .par_iter()
        .map(|&index| -> Result<ManifestEntry> {
            let tile = render_tile(scene, index)?;
            let rel = format!("{}/{}/{}", index.z, index.x, index.y);
            let dir = out_dir.join(format!("{}/{}", index.z, index.x));
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

            let n = TILE_SIZE * TILE_SIZE;
            let mut rgb = vec![0u8; n * view_bands];
            for (b, stretch) in stretches.iter().enumerate() {
                let band = tile.band(b);
                for i in 0..n {
                    rgb[i * view_bands + b] = match stretch {
                        Some(s) => s.apply(band[i]),
                        None => band[i] as u8,
                    };
                }
            }
            let png_rel = format!("{rel}.png");
            write_png_8bit(&out_dir.join(&png_rel), TILE_SIZE, TILE_SIZE, view_bands, &rgb)?;

            let raw_path = if opts.write_raw {
                let raw_rel = format!("{rel}.raw");
                let p = out_dir.join(&raw_rel);
                fs::write(&p, encode_samples(&tile.samples, desc.sample_type))
                    .map_err(|e| Error::io(&p, e))?;
                Some(raw_rel)
            } else {
                None
            };
            Ok(ManifestEntry {
                z: index.z,
                x: index.x,
                y: index.y,
                path: png_rel,
                bounds: tile.bounds,
                nodata: NODATA,
                projected_epsg,
                raw_path,
            })
        })
        .collect::<Result<_>>()?;

    let manifest_path = out_dir.join(MANIFEST_FILE);
    fs::write(&manifest_path, manifest_json(&entries)).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(TilingResult {
        manifest: entries,
        manifest_path,
    })
}

/// Reads back a raw tile payload written with `write_raw`.
pub fn read_raw_tile(path: &Path, band_count: usize, dtype: crate::raster::scene::SampleType) -> Result<Vec<u16>> {
    use crate::raster::scene::SampleType;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let want = TILE_SIZE * TILE_SIZE * band_count * dtype.bytes();
    if bytes.len() != want {
        return Err(Error::Validation(format!(
            "{} holds {} bytes, expected {want}",
            path.display(),
            bytes.len()
        )));
    }
    Ok(match dtype {
        SampleType::U8 => bytes.iter().map(|&b| b as u16).collect(),
        SampleType::U16 => bytes
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect(),
    })
}
