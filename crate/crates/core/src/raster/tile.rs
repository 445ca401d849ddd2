use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::crs::MERCATOR_HALF_WORLD;
use crate::raster::transform::GeoTransform;

/// Edge length of every emitted tile, in pixels.
pub const TILE_SIZE: usize = 512;

/// Latitude limit of the square web-mercator world, degrees.
pub const MAX_MERCATOR_LAT: f64 = 85.051_128_78;

/// Highest zoom accepted; keeps `2^zoom` and tile indices well inside u32.
pub const MAX_ZOOM: u8 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TileIndex {
    pub z: u8,
    pub x: u32,
    pub y: u32,
}

impl TileIndex {
    pub fn new(z: u8, x: u32, y: u32) -> Result<Self> {
        if z > MAX_ZOOM {
            return Err(Error::Domain(format!("zoom {z} exceeds maximum {MAX_ZOOM}")));
        }
        let n = 1u64 << z;
        if x as u64 >= n || y as u64 >= n {
            return Err(Error::Domain(format!(
                "tile {z}/{x}/{y} outside the 2^{z} grid"
            )));
        }
        Ok(TileIndex { z, x, y })
    }

    /// Tile extent in web-mercator metres.
    pub fn mercator_bounds(&self) -> GeoBounds {
        let size = tile_span_m(self.z);
        let west = -MERCATOR_HALF_WORLD + self.x as f64 * size;
        let north = MERCATOR_HALF_WORLD - self.y as f64 * size;
        GeoBounds {
            west,
            south: north - size,
            east: west + size,
            north,
        }
    }

    /// Pixel-to-mercator transform for the 512x512 rendering of this tile.
    pub fn geotransform(&self) -> GeoTransform {
        let b = self.mercator_bounds();
        let px = tile_span_m(self.z) / TILE_SIZE as f64;
        GeoTransform {
            origin_x: b.west,
            pixel_width: px,
            row_rotation: 0.0,
            origin_y: b.north,
            col_rotation: 0.0,
            pixel_height: -px,
            epsg: 3857,
        }
    }
}

impl fmt::Display for TileIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.z, self.x, self.y)
    }
}

impl FromStr for TileIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('/').collect();
        if parts.len() != 3 {
            return Err(Error::Validation(format!("tile id {s:?} is not z/x/y")));
        }
        let bad = || Error::Validation(format!("tile id {s:?} has a non-integer component"));
        let z = parts[0].parse().map_err(|_| bad())?;
        let x = parts[1].parse().map_err(|_| bad())?;
        let y = parts[2].parse().map_err(|_| bad())?;
        TileIndex::new(z, x, y)
    }
}

/// Axis-aligned bounds, `[west, south, east, north]` when serialized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoBounds {
    pub west: f64,
    pub south: f64,
    pub east: f64,
    pub north: f64,
}

impl GeoBounds {
    pub fn to_array(self) -> [f64; 4] {
        [self.west, self.south, self.east, self.north]
    }

    pub fn contains(&self, lon: f64, lat: f64, tol: f64) -> bool {
        lon >= self.west - tol
            && lon <= self.east + tol
            && lat >= self.south - tol
            && lat <= self.north + tol
    }
}

impl Serialize for GeoBounds {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for GeoBounds {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [west, south, east, north] = <[f64; 4]>::deserialize(d)?;
        Ok(GeoBounds {
            west,
            south,
            east,
            north,
        })
    }
}

pub fn tile_span_m(z: u8) -> f64 {
    2.0 * MERCATOR_HALF_WORLD / (1u64 << z) as f64
}

/// XYZ tile containing a WGS84 point.
pub fn lonlat_to_tile(lon: f64, lat: f64, zoom: u8) -> Result<TileIndex> {
    if zoom > MAX_ZOOM {
        return Err(Error::Domain(format!("zoom {zoom} exceeds maximum {MAX_ZOOM}")));
    }
    if !lon.is_finite() || !(-180.0..180.0).contains(&lon) {
        return Err(Error::Domain(format!(
            "longitude {lon} outside [-180, 180)"
        )));
    }
    if !lat.is_finite() || lat.abs() > MAX_MERCATOR_LAT {
        return Err(Error::Domain(format!(
            "latitude {lat} outside the web-mercator bound of ±{MAX_MERCATOR_LAT}°"
        )));
    }
    let n = (1u64 << zoom) as f64;
    let phi = lat.to_radians();
    let fx = (lon + 180.0) / 360.0 * n;
    let fy = (1.0 - (phi.tan() + 1.0 / phi.cos()).ln() / std::f64::consts::PI) / 2.0 * n;
    let max = (1u64 << zoom) - 1;
    // The rounded latitude bound sits a hair outside the square world.
    let x = (fx.floor().max(0.0) as u64).min(max) as u32;
    let y = (fy.floor().max(0.0) as u64).min(max) as u32;
    Ok(TileIndex { z: zoom, x, y })
}

/// Geographic `[west, south, east, north]` of a tile in degrees.
pub fn tile_bounds(tile: TileIndex) -> GeoBounds {
    let n = (1u64 << tile.z) as f64;
    let lon_at = |x: f64| x / n * 360.0 - 180.0;
    let lat_at = |y: f64| {
        (std::f64::consts::PI * (1.0 - 2.0 * y / n))
            .sinh()
            .atan()
            .to_degrees()
    };
    GeoBounds {
        west: lon_at(tile.x as f64),
        south: lat_at(tile.y as f64 + 1.0),
        east: lon_at(tile.x as f64 + 1.0),
        north: lat_at(tile.y as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_on_tile_cross() {
        assert_eq!(lonlat_to_tile(0.0, 0.0, 1).unwrap(), TileIndex { z: 1, x: 1, y: 1 });
    }

    #[test]
    fn western_edge_is_first_column() {
        assert_eq!(lonlat_to_tile(-180.0, 0.0, 3).unwrap().x, 0);
    }

    #[test]
    fn ahmedabad_corner_matches_high_precision_evaluation() {
        // Frozen from a 50-digit evaluation of the XYZ formula.
        let t = lonlat_to_tile(72.4587, 22.9942, 18).unwrap();
        assert_eq!((t.x, t.y), (183_834, 113_859));
        let t = lonlat_to_tile(72.5716, 23.0835, 18).unwrap();
        assert_eq!((t.x, t.y), (183_917, 113_789));
        assert!(tile_bounds(t).contains(72.5716, 23.0835, 0.0));
    }

    #[test]
    fn world_and_quadrant_bounds() {
        let b = tile_bounds(TileIndex::new(0, 0, 0).unwrap()).to_array();
        let want = [-180.0, -MAX_MERCATOR_LAT, 180.0, MAX_MERCATOR_LAT];
        for (a, w) in b.iter().zip(want) {
            assert!((a - w).abs() < 1e-8, "{b:?}");
        }
        let b = tile_bounds(TileIndex::new(1, 1, 1).unwrap()).to_array();
        let want = [0.0, -MAX_MERCATOR_LAT, 180.0, 0.0];
        for (a, w) in b.iter().zip(want) {
            assert!((a - w).abs() < 1e-8, "{b:?}");
        }
    }

    #[test]
    fn latitude_outside_bound_is_rejected() {
        let err = lonlat_to_tile(0.0, 86.0, 5).unwrap_err();
        assert!(err.to_string().contains("85.05112878"));
        assert!(lonlat_to_tile(180.0, 0.0, 5).is_err());
    }

    #[test]
    fn tile_id_parsing() {
        let t: TileIndex = "18/183834/113859".parse().unwrap();
        assert_eq!(t.to_string(), "18/183834/113859");
        assert!("1/2/0".parse::<TileIndex>().is_err());
        assert!("a/b".parse::<TileIndex>().is_err());
    }

    #[test]
    fn adjacent_tiles_share_edges() {
        let a = tile_bounds(TileIndex::new(10, 5, 7).unwrap());
        let b = tile_bounds(TileIndex::new(10, 6, 7).unwrap());
        let c = tile_bounds(TileIndex::new(10, 5, 8).unwrap());
        assert_eq!(a.east, b.west);
        assert_eq!(a.south, c.north);
    }
}
