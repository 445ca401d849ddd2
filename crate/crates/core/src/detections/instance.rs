use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::geojson::{property, Feature, FeatureCollection, Geometry};
use crate::geometry::{area, centroid, Bbox, Point};
use crate::raster::Crs;

/// A georeferenced tree crown.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeInstance {
    pub id: String,
    pub label: String,
    /// Outline in lon/lat degrees, open ring.
    pub polygon: Vec<Point>,
    /// Area-weighted centroid of the projected outline, as lon/lat.
    pub centroid: Point,
    /// Same centroid in the projected CRS, metres.
    pub centroid_m: Point,
    /// Planar area of the projected outline.
    pub area_m2: f64,
    pub score: f64,
    pub epoch: String,
    pub projected_epsg: u32,
    /// Tiles (`z/x/y`) the instance was detected on, sorted.
    pub source_tiles: Vec<String>,
}

impl TreeInstance {
    /// Builds an instance from an outline in the metric CRS `crs`.
    pub fn from_projected(
        id: impl Into<String>,
        label: impl Into<String>,
        ring_m: &[Point],
        crs: Crs,
        score: f64,
        epoch: impl Into<String>,
        source_tiles: Vec<String>,
    ) -> Result<Self> {
        let lonlat: Vec<Point> = ring_m.iter().map(|p| crs.to_lonlat(p[0], p[1])).collect();
        Self::from_rings(id, label, lonlat, ring_m, crs, score, epoch, source_tiles)
    }

    /// Like [`TreeInstance::from_projected`] with the lon/lat outline given
    /// explicitly rather than derived from `ring_m`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_rings(
        id: impl Into<String>,
        label: impl Into<String>,
        polygon: Vec<Point>,
        ring_m: &[Point],
        crs: Crs,
        score: f64,
        epoch: impl Into<String>,
        source_tiles: Vec<String>,
    ) -> Result<Self> {
        let id = id.into();
        let a = area(ring_m);
        if !(a > 0.0) {
            return Err(Error::Validation(format!("instance {id} has zero area")));
        }
        let centroid_m = centroid(ring_m);
        let inst = TreeInstance {
            polygon,
            centroid: crs.to_lonlat(centroid_m[0], centroid_m[1]),
            centroid_m,
            area_m2: a,
            score,
            epoch: epoch.into(),
            projected_epsg: crs.epsg(),
            label: label.into(),
            source_tiles,
            id,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn crs(&self) -> Result<Crs> {
        Crs::from_epsg(self.projected_epsg)
    }

    pub fn projected_polygon(&self) -> Result<Vec<Point>> {
        let crs = self.crs()?;
        Ok(self.polygon.iter().map(|p| crs.from_lonlat(p[0], p[1])).collect())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Validation(format!("instance {}: {m}", self.id)));
        if self.epoch.is_empty() {
            return fail("missing epoch tag");
        }
        if self.polygon.len() < 3 {
            return fail("polygon has fewer than 3 vertices");
        }
        if !(self.area_m2 > 0.0 && self.area_m2.is_finite()) {
            return fail("area must be positive");
        }
        if !(0.0..=1.0).contains(&self.score) {
            return fail("score out of range");
        }
        let bb = Bbox::of(&self.polygon).expect("non-empty polygon");
        if !bb.contains(self.centroid, 1e-9) {
            return fail("centroid outside the polygon bounding box");
        }
        Ok(())
    }
}

pub fn instances_to_geojson(instances: &[TreeInstance]) -> FeatureCollection {
    let features = instances
        .iter()
        .map(|t| {
            let mut p = Map::new();
            p.insert("id".into(), Value::from(t.id.clone()));
            p.insert("label".into(), Value::from(t.label.clone()));
            p.insert("score".into(), Value::from(t.score));
            p.insert("area_m2".into(), Value::from(t.area_m2));
            p.insert("epoch".into(), Value::from(t.epoch.clone()));
            p.insert("centroid".into(), Value::from(t.centroid.to_vec()));
            p.insert("centroid_m".into(), Value::from(t.centroid_m.to_vec()));
            p.insert("projected_epsg".into(), Value::from(t.projected_epsg));
            p.insert("source_tiles".into(), Value::from(t.source_tiles.clone()));
            Feature { geometry: Geometry::polygon(&t.polygon), properties: p }
        })
        .collect();
    FeatureCollection { features }
}

pub fn instances_from_geojson(fc: &FeatureCollection) -> Result<Vec<TreeInstance>> {
    fc.features
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let polygon = f
                .geometry
                .exterior()
                .ok_or_else(|| Error::Validation(format!("feature {i}: expected a Polygon geometry")))?;
            let label = match f.properties.get("label") {
                Some(_) => property(f, i, "label")?,
                None => "tree".to_string(),
            };
            let source_tiles = match f.properties.get("source_tiles") {
                Some(_) => property(f, i, "source_tiles")?,
                None => Vec::new(),
            };
            let inst = TreeInstance {
                id: property(f, i, "id")?,
                label,
                polygon,
                centroid: property(f, i, "centroid")?,
                centroid_m: property(f, i, "centroid_m")?,
                area_m2: property(f, i, "area_m2")?,
                score: property(f, i, "score")?,
                epoch: property(f, i, "epoch")?,
                projected_epsg: property(f, i, "projected_epsg")?,
                source_tiles,
            };
            inst.validate()?;
            Ok(inst)
        })
        .collect()
}
