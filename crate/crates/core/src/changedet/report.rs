use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::changedet::matching::{ChangeRecord, Verdict};
use crate::detections::TreeInstance;
use crate::error::{Error, Result};
use crate::geojson::{Feature, FeatureCollection, Geometry};
use crate::geometry::{contains_even_odd, dedup_vertices, is_simple, segments_intersect, Point};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: String,
    /// Lon/lat ring, open.
    pub polygon: Vec<Point>,
}

impl Region {
    pub fn new(id: impl Into<String>, polygon: Vec<Point>) -> Result<Self> {
        let id = id.into();
        let polygon = dedup_vertices(&polygon);
        if polygon.len() < 3 {
            return Err(Error::Validation(format!("region {id}: fewer than 3 vertices")));
        }
        if !is_simple(&polygon) {
            return Err(Error::Validation(format!("region {id}: self-intersecting polygon")));
        }
        Ok(Region { id, polygon })
    }

    pub fn contains(&self, p: Point) -> bool {
        contains_even_odd(&self.polygon, p)
    }
}

/// Regions from a FeatureCollection. The `id` property (string or number)
/// names each region; features without one are called `region-<index>`.
pub fn regions_from_geojson(fc: &FeatureCollection) -> Result<Vec<Region>> {
    fc.features
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let ring = f
                .geometry
                .exterior()
                .ok_or_else(|| Error::Validation(format!("region feature {i}: expected a Polygon geometry")))?;
            let id = match f.properties.get("id") {
                Some(Value::String(s)) => s.clone(),
                Some(Value::Number(n)) => n.to_string(),
                _ => format!("region-{i}"),
            };
            Region::new(id, ring)
        })
        .collect()
}

pub fn regions_to_geojson(regions: &[Region]) -> FeatureCollection {
    FeatureCollection {
        features: regions
            .iter()
            .map(|r| {
                let mut p = Map::new();
                p.insert("id".into(), Value::from(r.id.clone()));
                Feature { geometry: Geometry::polygon(&r.polygon), properties: p }
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeCount {
    pub count: usize,
    pub area_m2: f64,
}

/// Instances whose centroid lies in `region` (all of them without one).
pub fn count_trees(instances: &[TreeInstance], region: Option<&[Point]>) -> Result<TreeCount> {
    let ring = match region {
        Some(r) => {
            let ring = dedup_vertices(r);
            if ring.len() < 3 || !is_simple(&ring) {
                return Err(Error::Validation("region polygon must be simple with at least 3 vertices".into()));
            }
            Some(ring)
        }
        None => None,
    };
    let mut c = TreeCount { count: 0, area_m2: 0.0 };
    for t in instances {
        if ring.as_ref().is_none_or(|r| contains_even_odd(r, t.centroid)) {
            c.count += 1;
            c.area_m2 += t.area_m2;
        }
    }
    Ok(c)
}

/// Per-region change totals. A persisted tree is attributed to the region
/// holding its later-epoch centroid, and counts there for both epochs, so
/// `persisted + lost = earlier_count` and `persisted + gained = later_count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub region_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub polygon: Option<Vec<Point>>,
    pub earlier_count: usize,
    pub later_count: usize,
    pub earlier_area_m2: f64,
    pub later_area_m2: f64,
    pub persisted: usize,
    pub gained: usize,
    pub lost: usize,
    pub net_count: i64,
    pub net_area_m2: f64,
}

impl RegionReport {
    fn tally<'a>(region_id: String, polygon: Option<Vec<Point>>, records: impl Iterator<Item = &'a ChangeRecord>) -> Self {
        let mut r = RegionReport {
            region_id,
            polygon,
            earlier_count: 0,
            later_count: 0,
            earlier_area_m2: 0.0,
            later_area_m2: 0.0,
            persisted: 0,
            gained: 0,
            lost: 0,
            net_count: 0,
            net_area_m2: 0.0,
        };
        for rec in records {
            match rec.verdict {
                Verdict::Persisted => r.persisted += 1,
                Verdict::Gained => r.gained += 1,
                Verdict::Lost => r.lost += 1,
            }
            if let Some(e) = &rec.earlier {
                r.earlier_count += 1;
                r.earlier_area_m2 += e.area_m2;
            }
            if let Some(l) = &rec.later {
                r.later_count += 1;
                r.later_area_m2 += l.area_m2;
            }
        }
        r.net_count = r.later_count as i64 - r.earlier_count as i64;
        r.net_area_m2 = r.later_area_m2 - r.earlier_area_m2;
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeReport {
    pub scene: RegionReport,
    pub regions: Vec<RegionReport>,
    pub warnings: Vec<String>,
}

fn rings_overlap(a: &[Point], b: &[Point]) -> bool {
    let edges = |r: &[Point]| -> Vec<(Point, Point)> { (0..r.len()).map(|i| (r[i], r[(i + 1) % r.len()])).collect() };
    let (ea, eb) = (edges(a), edges(b));
    // Shared boundaries are allowed; only strict interior overlap counts.
    let inside = |p: Point, ring: &[Point]| contains_even_odd(ring, p) && !ring.contains(&p);
    if a.iter().any(|&p| inside(p, b)) || b.iter().any(|&p| inside(p, a)) {
        return true;
    }
    ea.iter().any(|&(p, q)| {
        eb.iter().any(|&(r, s)| {
            let shared = p == r || p == s || q == r || q == s;
            !shared && segments_intersect(p, q, r, s) && {
                let mid = [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0];
                inside(mid, b) || inside([(r[0] + s[0]) / 2.0, (r[1] + s[1]) / 2.0], a)
            }
        })
    })
}

pub fn region_report(records: &[ChangeRecord], regions: &[Region]) -> ChangeReport {
    let mut warnings = Vec::new();
    for i in 0..regions.len() {
        for j in i + 1..regions.len() {
            if rings_overlap(&regions[i].polygon, &regions[j].polygon) {
                warnings.push(format!("regions {} and {} overlap", regions[i].id, regions[j].id));
            }
        }
    }
    let reports = regions
        .par_iter()
        .map(|reg| {
            let inside = records.iter().filter(|r| reg.contains(r.representative().centroid));
            RegionReport::tally(reg.id.clone(), Some(reg.polygon.clone()), inside)
        })
        .collect();
    ChangeReport { scene: RegionReport::tally("scene".into(), None, records.iter()), regions: reports, warnings }
}

pub fn changes_geojson(records: &[ChangeRecord]) -> FeatureCollection {
    let features = records
        .iter()
        .map(|r| {
            let t = r.representative();
            let mut p = Map::new();
            p.insert("verdict".into(), Value::from(r.verdict.as_str()));
            p.insert("earlier_id".into(), r.earlier.as_ref().map(|e| Value::from(e.id.clone())).unwrap_or(Value::Null));
            p.insert("later_id".into(), r.later.as_ref().map(|l| Value::from(l.id.clone())).unwrap_or(Value::Null));
            p.insert("earlier_area_m2".into(), r.earlier.as_ref().map(|e| Value::from(e.area_m2)).unwrap_or(Value::Null));
            p.insert("later_area_m2".into(), r.later.as_ref().map(|l| Value::from(l.area_m2)).unwrap_or(Value::Null));
            p.insert("distance_m".into(), r.distance_m.map(Value::from).unwrap_or(Value::Null));
            p.insert("area_delta_m2".into(), r.area_delta_m2.map(Value::from).unwrap_or(Value::Null));
            p.insert("centroid".into(), Value::from(t.centroid.to_vec()));
            Feature { geometry: Geometry::polygon(&t.polygon), properties: p }
        })
        .collect();
    FeatureCollection { features }
}

pub const REPORT_CSV_HEADER: &str =
    "region,earlier_count,later_count,earlier_area_m2,later_area_m2,persisted,gained,lost,net_count,net_area_m2";

pub fn report_csv(report: &ChangeReport) -> String {
    let mut out = String::from(REPORT_CSV_HEADER);
    out.push('\n');
    for r in std::iter::once(&report.scene).chain(&report.regions) {
        out.push_str(&format!(
            "{},{},{},{:.3},{:.3},{},{},{},{},{:.3}\n",
            r.region_id,
            r.earlier_count,
            r.later_count,
            r.earlier_area_m2,
            r.later_area_m2,
            r.persisted,
            r.gained,
            r.lost,
            r.net_count,
            r.net_area_m2
        ));
    }
    out
}

pub fn summary_markdown(report: &ChangeReport, earlier_epoch: &str, later_epoch: &str, params: &str) -> String {
    let s = &report.scene;
    let mut out = format!("# Tree change {earlier_epoch} to {later_epoch}\n\n");
    out.push_str(&format!("Matching: {params}\n\n"));
    out.push_str(&format!(
        "Scene: {} trees ({:.1} m²) in {earlier_epoch}, {} trees ({:.1} m²) in {later_epoch}.\n",
        s.earlier_count, s.earlier_area_m2, s.later_count, s.later_area_m2
    ));
    out.push_str(&format!(
        "Persisted {}, gained {}, lost {}; net {:+} trees, {:+.1} m² canopy.\n\n",
        s.persisted, s.gained, s.lost, s.net_count, s.net_area_m2
    ));
    if !report.regions.is_empty() {
        out.push_str("| region | before | after | persisted | gained | lost | net | net area m² |\n");
        out.push_str("|---|---:|---:|---:|---:|---:|---:|---:|\n");
        for r in &report.regions {
            out.push_str(&format!(
                "| {} | {} | {} | {} | {} | {} | {:+} | {:+.1} |\n",
                r.region_id, r.earlier_count, r.later_count, r.persisted, r.gained, r.lost, r.net_count, r.net_area_m2
            ));
        }
        out.push('\n');
    }
    for w in &report.warnings {
        out.push_str(&format!("Warning: {w}\n"));
    }
    out
}
