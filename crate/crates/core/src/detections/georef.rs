use std::collections::HashMap;

use rayon::prelude::*;

use crate::detections::instance::TreeInstance;
use crate::detections::parse::Detection;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::raster::{Crs, GeoTransform, ManifestEntry, TileIndex};

/// Pixel-to-world mapping for one tile plus the metric CRS used for
/// measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct TileFrame {
    pub transform: GeoTransform,
    pub source: Crs,
    pub projected: Crs,
}

impl TileFrame {
    pub fn from_transform(transform: GeoTransform, projected_epsg: u32) -> Result<Self> {
        transform.validate()?;
        let projected = Crs::from_epsg(projected_epsg)?;
        if !projected.is_metric() {
            return Err(Error::Config(format!("EPSG:{projected_epsg} is not a metric CRS")));
        }
        Ok(TileFrame { source: transform.crs()?, transform, projected })
    }

    pub fn from_tile(tile: TileIndex, projected_epsg: u32) -> Result<Self> {
        Self::from_transform(tile.geotransform(), projected_epsg)
    }

    pub fn from_manifest(entry: &ManifestEntry) -> Result<Self> {
        Self::from_tile(entry.tile()?, entry.projected_epsg)
    }

    pub fn pixel_to_lonlat(&self, col: f64, row: f64) -> Point {
        let [x, y] = self.transform.pixel_to_geo(col, row);
        self.source.to_lonlat(x, y)
    }

    pub fn lonlat_to_pixel(&self, lon: f64, lat: f64) -> Result<Point> {
        let [x, y] = self.source.from_lonlat(lon, lat);
        self.transform.geo_to_pixel(x, y)
    }

    pub fn pixel_to_projected(&self, col: f64, row: f64) -> Point {
        let [lon, lat] = self.pixel_to_lonlat(col, row);
        self.projected.from_lonlat(lon, lat)
    }
}

/// Instance id for the detection at `index` of a results file.
pub fn instance_id(epoch: &str, tile: &str, index: usize) -> String {
    format!("{epoch}:{tile}:{index}")
}

pub fn georeference(det: &Detection, frame: &TileFrame, epoch: &str) -> Result<TreeInstance> {
    let tile = det.tile.to_string();
    let lonlat: Vec<Point> = det.polygon.iter().map(|p| frame.pixel_to_lonlat(p[0], p[1])).collect();
    let ring: Vec<Point> = lonlat.iter().map(|p| frame.projected.from_lonlat(p[0], p[1])).collect();
    TreeInstance::from_rings(
        instance_id(epoch, &tile, det.index),
        det.label.clone(),
        lonlat,
        &ring,
        frame.projected,
        det.score,
        epoch,
        vec![tile],
    )
}

/// Georeferences every detection against the tile manifest, in input order.
pub fn georeference_all(dets: &[Detection], manifest: &[ManifestEntry], epoch: &str) -> Result<Vec<TreeInstance>> {
    if epoch.is_empty() {
        return Err(Error::Validation("epoch tag must not be empty".into()));
    }
    let mut frames: HashMap<TileIndex, TileFrame> = HashMap::new();
    for e in manifest {
        frames.insert(e.tile()?, TileFrame::from_manifest(e)?);
    }
    dets.par_iter()
        .map(|d| {
            let frame = frames
                .get(&d.tile)
                .ok_or_else(|| Error::Validation(format!("tile {} (detection {}) missing from manifest", d.tile, d.index)))?;
            georeference(d, frame, epoch)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::BoxXywh;
    use crate::raster::tile_bounds;

    fn square(tile: TileIndex, x: f64, y: f64, s: f64) -> Detection {
        Detection {
            index: 0,
            tile,
            label: "tree".into(),
            score: 0.8,
            bbox: BoxXywh { x, y, w: s, h: s },
            polygon: vec![[x, y], [x + s, y], [x + s, y + s], [x, y + s]],
        }
    }

    #[test]
    fn ten_pixel_square_at_half_metre() {
        let gt = GeoTransform::north_up(500_000.0, 2_500_000.0, 0.5, 32643).unwrap();
        let frame = TileFrame::from_transform(gt, 32643).unwrap();
        let t = georeference(&square(TileIndex::new(18, 0, 0).unwrap(), 3.0, 3.0, 10.0), &frame, "2018").unwrap();
        assert!((t.area_m2 - 25.0).abs() < 1e-6);
        assert!((t.centroid_m[0] - 500_004.0).abs() < 1e-6);
        assert!((t.centroid_m[1] - 2_499_996.0).abs() < 1e-6);
    }

    #[test]
    fn tile_corners_match_bounds() {
        let tile = TileIndex::new(18, 183834, 113859).unwrap();
        let frame = TileFrame::from_tile(tile, 32643).unwrap();
        let b = tile_bounds(tile);
        let ul = frame.pixel_to_lonlat(0.0, 0.0);
        let lr = frame.pixel_to_lonlat(512.0, 512.0);
        assert!((ul[0] - b.west).abs() < 1e-12 && (ul[1] - b.north).abs() < 1e-12);
        assert!((lr[0] - b.east).abs() < 1e-12 && (lr[1] - b.south).abs() < 1e-12);
        let t = georeference(&square(tile, 0.0, 0.0, 20.0), &frame, "2018").unwrap();
        assert_eq!(t.polygon[0], ul);
        for (p, q) in t.polygon.iter().zip(&[[0.0, 0.0], [20.0, 0.0], [20.0, 20.0], [0.0, 20.0]]) {
            let back = frame.lonlat_to_pixel(p[0], p[1]).unwrap();
            assert!((back[0] - q[0]).abs() < 1e-6 && (back[1] - q[1]).abs() < 1e-6);
        }
    }

    #[test]
    fn missing_tile_is_an_error() {
        let tile = TileIndex::new(18, 5, 5).unwrap();
        let err = georeference_all(&[square(tile, 0.0, 0.0, 5.0)], &[], "2018").unwrap_err();
        assert!(err.to_string().contains("18/5/5"));
    }
}
