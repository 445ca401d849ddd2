//! Synthetic two-epoch scenes of disk-shaped trees.
//!
//! Random streams (ChaCha8 seeded from `spec.seed`, one stream per
//! artifact): 0 tree placement, 1 second-epoch edits, 2 and 3 detector
//! output for the two epochs, 4 background texture.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::annotations::{scanline_spans, InstanceMask};
use crate::changedet::Region;
use crate::error::{Error, Result};
use crate::geometry::{area, clip_to_rect, Bbox, Point};
use crate::raster::crs::lonlat_to_mercator;
use crate::raster::{lonlat_to_tile, plan_tiles, Crs, GeoTransform, SampleType, Scene, SceneDescriptor, TileIndex, TILE_SIZE};
use crate::synthgen::spec::SynthSpec;

pub const STREAM_PLACEMENT: u64 = 0;
pub const STREAM_EDITS: u64 = 1;
pub const STREAM_DETECTOR: [u64; 2] = [2, 3];
pub const STREAM_TEXTURE: u64 = 4;

/// Vertices of a crown outline.
pub const OUTLINE_VERTICES: usize = 48;
/// Clipped crown pieces smaller than this (tile px²) are dropped.
pub const MIN_PIECE_AREA_PX: f64 = 1.0;
/// Distance kept between tree centres and region edges.
const REGION_MARGIN_M: f64 = 1.0;
const REGION_GAP_M: f64 = 2.0;

const BACKGROUND: [f64; 4] = [900.0, 1000.0, 1100.0, 1400.0];
const CANOPY: [f64; 4] = [2600.0, 3200.0, 2400.0, 5200.0];

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fate {
    Persisted,
    Removed,
    Added,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeState {
    pub center_m: Point,
    pub center_lonlat: Point,
    /// Scene pixels whose centre falls inside the outline, times the pixel area.
    pub raster_area_m2: f64,
    pub region: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerTree {
    pub id: String,
    pub radius_m: f64,
    pub fate: Fate,
    pub earlier: Option<TreeState>,
    pub later: Option<TreeState>,
}

/// Per-region change counts under the later-centroid attribution rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionTally {
    pub region_id: String,
    pub earlier_count: usize,
    pub later_count: usize,
    pub persisted: usize,
    pub gained: usize,
    pub lost: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    pub seed: u64,
    pub projected_epsg: u32,
    pub gsd_m: f64,
    pub zoom: u8,
    pub epochs: [String; 2],
    pub trees: Vec<LedgerTree>,
    pub scene: RegionTally,
    pub regions: Vec<RegionTally>,
}

impl Ledger {
    pub fn ids_with_fate(&self, fate: Fate) -> Vec<&str> {
        self.trees.iter().filter(|t| t.fate == fate).map(|t| t.id.as_str()).collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("ledger serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json("ledger", &e))
    }
}

/// A clipped crown outline in the pixel frame of one tile.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthPiece {
    pub tree_id: String,
    pub polygon: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthTree {
    pub id: String,
    pub center_m: Point,
    pub radius_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochData {
    pub tag: String,
    pub scene: Scene,
    pub trees: Vec<TruthTree>,
    /// Every planned tile, possibly with no pieces.
    pub tile_annotations: BTreeMap<TileIndex, Vec<TruthPiece>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthScene {
    pub spec: SynthSpec,
    pub crs: Crs,
    pub transform: GeoTransform,
    pub width: usize,
    pub height: usize,
    pub tiles: Vec<TileIndex>,
    pub epochs: Vec<EpochData>,
    pub regions: Vec<Region>,
    pub ledger: Ledger,
}

impl SynthScene {
    /// Raster extent in projected metres.
    pub fn extent_m(&self) -> Bbox {
        let g = self.spec.gsd_m;
        Bbox {
            min_x: self.transform.origin_x,
            max_x: self.transform.origin_x + self.width as f64 * g,
            min_y: self.transform.origin_y - self.height as f64 * g,
            max_y: self.transform.origin_y,
        }
    }

    /// Outline in scene pixel coordinates.
    pub fn scene_pixels(&self, ring_m: &[Point]) -> Vec<Point> {
        to_scene_px(&self.transform, ring_m)
    }
}

/// Regular polygon around `center`; `radii` overrides the radius per vertex.
pub fn disk_ring(center: Point, radius: f64, radii: Option<&[f64]>) -> Vec<Point> {
    (0..OUTLINE_VERTICES)
        .map(|k| {
            let t = k as f64 / OUTLINE_VERTICES as f64 * std::f64::consts::TAU;
            let r = radii.map_or(radius, |rs| rs[k]);
            [center[0] + r * t.cos(), center[1] + r * t.sin()]
        })
        .collect()
}

fn to_scene_px(gt: &GeoTransform, ring_m: &[Point]) -> Vec<Point> {
    ring_m
        .iter()
        .map(|p| [(p[0] - gt.origin_x) / gt.pixel_width, (p[1] - gt.origin_y) / gt.pixel_height])
        .collect()
}

/// Clips a projected outline to every planned tile it reaches, in tile
/// pixel coordinates. Pieces below [`MIN_PIECE_AREA_PX`] or covering no
/// pixel centre are dropped.
pub fn tile_pieces(ring_m: &[Point], crs: Crs, zoom: u8, plan: &BTreeSet<TileIndex>) -> Result<Vec<(TileIndex, Vec<Point>)>> {
    let lonlat: Vec<Point> = ring_m.iter().map(|p| crs.to_lonlat(p[0], p[1])).collect();
    let bb = Bbox::of(&lonlat).ok_or_else(|| Error::Validation("empty outline".into()))?;
    let nw = lonlat_to_tile(bb.min_x, bb.max_y, zoom)?;
    let se = lonlat_to_tile(bb.max_x, bb.min_y, zoom)?;
    let merc: Vec<Point> = lonlat.iter().map(|p| lonlat_to_mercator(p[0], p[1])).collect();
    let frame = Bbox { min_x: 0.0, min_y: 0.0, max_x: TILE_SIZE as f64, max_y: TILE_SIZE as f64 };
    let mut out = Vec::new();
    for x in nw.x..=se.x {
        for y in nw.y..=se.y {
            let tile = TileIndex::new(zoom, x, y)?;
            if !plan.contains(&tile) {
                continue;
            }
            let gt = tile.geotransform();
            let px: Vec<Point> = merc.iter().map(|p| gt.geo_to_pixel(p[0], p[1])).collect::<Result<_>>()?;
            let piece = clip_to_rect(&px, &frame);
            if piece.len() < 3 || area(&piece) < MIN_PIECE_AREA_PX {
                continue;
            }
            if InstanceMask::rasterize(&piece, TILE_SIZE, TILE_SIZE, "").is_empty() {
                continue;
            }
            out.push((tile, piece));
        }
    }
    Ok(out)
}

struct Layout {
    crs: Crs,
    transform: GeoTransform,
    width: usize,
    height: usize,
    extent: Bbox,
    region_rects: Vec<Bbox>,
}

fn layout(spec: &SynthSpec) -> Result<Layout> {
    let e = &spec.extent;
    let crs = Crs::utm_for((e.west + e.east) / 2.0, (e.south + e.north) / 2.0);
    let mut pts = Vec::new();
    for k in 0..=8 {
        let t = k as f64 / 8.0;
        let lon = e.west + t * (e.east - e.west);
        let lat = e.south + t * (e.north - e.south);
        pts.push(crs.from_lonlat(lon, e.south));
        pts.push(crs.from_lonlat(lon, e.north));
        pts.push(crs.from_lonlat(e.west, lat));
        pts.push(crs.from_lonlat(e.east, lat));
    }
    let bb = Bbox::of(&pts).expect("extent samples");
    let g = spec.gsd_m;
    let origin_x = (bb.min_x / g).floor() * g;
    let origin_y = (bb.max_y / g).ceil() * g;
    let width = ((bb.max_x - origin_x) / g).ceil() as usize;
    let height = ((origin_y - bb.min_y) / g).ceil() as usize;
    if width == 0 || height == 0 {
        return Err(Error::Config("extent is smaller than one pixel".into()));
    }
    let transform = GeoTransform::north_up(origin_x, origin_y, g, crs.epsg())?;
    let extent = Bbox {
        min_x: origin_x,
        max_x: origin_x + width as f64 * g,
        min_y: origin_y - height as f64 * g,
        max_y: origin_y,
    };
    let n = spec.regions;
    let strip = extent.width() / n.max(1) as f64;
    let region_rects = (0..n)
        .map(|k| Bbox {
            min_x: extent.min_x + k as f64 * strip + REGION_GAP_M,
            max_x: extent.min_x + (k + 1) as f64 * strip - REGION_GAP_M,
            min_y: extent.min_y,
            max_y: extent.max_y,
        })
        .filter(|r| r.max_x > r.min_x)
        .collect();
    Ok(Layout { crs, transform, width, height, extent, region_rects })
}

fn clear_of_region_edges(p: Point, rects: &[Bbox]) -> bool {
    rects
        .iter()
        .all(|r| (p[0] - r.min_x).abs() >= REGION_MARGIN_M && (p[0] - r.max_x).abs() >= REGION_MARGIN_M)
}

fn far_from(p: Point, others: &[Point], d: f64) -> bool {
    others.iter().all(|q| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) >= d * d)
}

/// Places `n` centres by rejection sampling.
fn place(
    rng: &mut ChaCha8Rng,
    n: usize,
    spec: &SynthSpec,
    inner: &Bbox,
    rects: &[Bbox],
    existing: &[Point],
) -> Result<Vec<(Point, f64)>> {
    let mut placed: Vec<Point> = existing.to_vec();
    let mut out = Vec::with_capacity(n);
    let limit = 100_000 + 1_000 * n;
    let mut attempts = 0;
    while out.len() < n {
        attempts += 1;
        if attempts > limit || !(inner.min_x < inner.max_x && inner.min_y < inner.max_y) {
            return Err(Error::Validation(format!(
                "tree count infeasible: placed {} of {n} trees with {} m spacing before the attempt budget ran out",
                out.len(),
                spec.min_spacing_m
            )));
        }
        let p = [rng.random_range(inner.min_x..inner.max_x), rng.random_range(inner.min_y..inner.max_y)];
        let r = rng.random_range(spec.crown_radius_m[0]..=spec.crown_radius_m[1]);
        if far_from(p, &placed, spec.min_spacing_m) && clear_of_region_edges(p, rects) {
            placed.push(p);
            out.push((p, r));
        }
    }
    Ok(out)
}

fn truncated_normal(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let n = Normal::new(0.0, sigma).expect("finite sigma");
    loop {
        let v = n.sample(rng);
        if v.abs() <= 3.0 * sigma {
            return v;
        }
    }
}

fn render(layout: &Layout, trees: &[TruthTree], texture: &[f32], gain: f64) -> Vec<u16> {
    let (w, h) = (layout.width, layout.height);
    let mut cover = vec![0.0f32; w * h];
    let g = layout.transform.pixel_width;
    const SUB: usize = 4;
    for t in trees {
        let c = [(t.center_m[0] - layout.transform.origin_x) / g, (layout.transform.origin_y - t.center_m[1]) / g];
        let r = t.radius_m / g;
        let c0 = (c[0] - r - 1.0).floor().max(0.0) as usize;
        let c1 = ((c[0] + r + 1.0).ceil() as usize).min(w);
        let r0 = (c[1] - r - 1.0).floor().max(0.0) as usize;
        let r1 = ((c[1] + r + 1.0).ceil() as usize).min(h);
        for row in r0..r1 {
            for col in c0..c1 {
                let mut hits = 0;
                for sy in 0..SUB {
                    for sx in 0..SUB {
                        let x = col as f64 + (sx as f64 + 0.5) / SUB as f64 - c[0];
                        let y = row as f64 + (sy as f64 + 0.5) / SUB as f64 - c[1];
                        if x * x + y * y <= r * r {
                            hits += 1;
                        }
                    }
                }
                let f = hits as f32 / (SUB * SUB) as f32;
                let cell = &mut cover[row * w + col];
                *cell = cell.max(f);
            }
        }
    }
    let n = w * h;
    let mut out = vec![0u16; 4 * n];
    for b in 0..4 {
        for i in 0..n {
            let (col, row) = ((i % w) as f64, (i / w) as f64);
            let pattern = 80.0 * (col / 17.0).sin() * (row / 23.0).cos();
            let bg = BACKGROUND[b] + pattern;
            let f = cover[i] as f64;
            let v = gain * (bg * (1.0 - f) + CANOPY[b] * f) + texture[b * n + i] as f64;
            out[b * n + i] = v.round().clamp(1.0, 65535.0) as u16;
        }
    }
    out
}

fn raster_area_m2(layout: &Layout, ring_m: &[Point]) -> f64 {
    let px = to_scene_px(&layout.transform, ring_m);
    let mut count = 0usize;
    scanline_spans(&px, layout.width, layout.height, |_, s, e| count += e - s);
    count as f64 * layout.transform.pixel_width * layout.transform.pixel_width
}

fn region_of(p_lonlat: Point, regions: &[Region]) -> Option<String> {
    regions.iter().find(|r| r.contains(p_lonlat)).map(|r| r.id.clone())
}

fn tally(region_id: &str, trees: &[LedgerTree], filter: impl Fn(&LedgerTree) -> bool) -> RegionTally {
    let mut t = RegionTally {
        region_id: region_id.into(),
        earlier_count: 0,
        later_count: 0,
        persisted: 0,
        gained: 0,
        lost: 0,
    };
    for tree in trees.iter().filter(|x| filter(x)) {
        match tree.fate {
            Fate::Persisted => {
                t.persisted += 1;
                t.earlier_count += 1;
                t.later_count += 1;
            }
            Fate::Removed => {
                t.lost += 1;
                t.earlier_count += 1;
            }
            Fate::Added => {
                t.gained += 1;
                t.later_count += 1;
            }
        }
    }
    t
}

/// Builds both epochs, their truth annotations and the ledger.
pub fn generate_scene(spec: &SynthSpec) -> Result<SynthScene> {
    spec.validate()?;
    let lay = layout(spec)?;
    let edge = spec.crown_radius_m[1] + spec.max_jitter_m() + 1.5;
    let inner = Bbox {
        min_x: lay.extent.min_x + edge,
        max_x: lay.extent.max_x - edge,
        min_y: lay.extent.min_y + edge,
        max_y: lay.extent.max_y - edge,
    };

    let mut rng = stream(spec.seed, STREAM_PLACEMENT);
    let first = place(&mut rng, spec.tree_count, spec, &inner, &lay.region_rects, &[])?;

    let mut rng = stream(spec.seed, STREAM_EDITS);
    let n = first.len();
    let k_removed = (spec.edits.removed * n as f64).round() as usize;
    let removed: BTreeSet<usize> = index::sample(&mut rng, n, k_removed).into_iter().collect();
    let survivors: Vec<usize> = (0..n).filter(|i| !removed.contains(i)).collect();
    let k_jit = (spec.edits.jittered * survivors.len() as f64).round() as usize;
    let jittered: BTreeSet<usize> = index::sample(&mut rng, survivors.len(), k_jit).into_iter().map(|k| survivors[k]).collect();
    let mut later_center: Vec<Point> = first.iter().map(|f| f.0).collect();
    for &i in &jittered {
        let c = first[i].0;
        for _ in 0..100 {
            let p = [
                c[0] + truncated_normal(&mut rng, spec.edits.jitter_sigma_m),
                c[1] + truncated_normal(&mut rng, spec.edits.jitter_sigma_m),
            ];
            if clear_of_region_edges(p, &lay.region_rects) {
                later_center[i] = p;
                break;
            }
        }
    }
    let k_added = (spec.edits.added * n as f64).round() as usize;
    let firsts: Vec<Point> = first.iter().map(|f| f.0).collect();
    let added = place(&mut rng, k_added, spec, &inner, &lay.region_rects, &firsts)?;

    let width_digits = ((n + k_added).max(1) as f64).log10().floor() as usize + 1;
    let id = |k: usize| format!("t{k:0width$}", width = width_digits.max(4));
    let regions: Vec<Region> = lay
        .region_rects
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let ring: Vec<Point> = [[r.min_x, r.min_y], [r.max_x, r.min_y], [r.max_x, r.max_y], [r.min_x, r.max_y]]
                .iter()
                .map(|p| lay.crs.to_lonlat(p[0], p[1]))
                .collect();
            Region::new(format!("R{}", k + 1), ring)
        })
        .collect::<Result<_>>()?;

    let state = |c: Point, r: f64| -> TreeState {
        let ll = lay.crs.to_lonlat(c[0], c[1]);
        TreeState {
            center_m: c,
            center_lonlat: ll,
            raster_area_m2: raster_area_m2(&lay, &disk_ring(c, r, None)),
            region: region_of(ll, &regions),
        }
    };
    let mut ledger_trees = Vec::with_capacity(n + k_added);
    let (mut e1, mut e2) = (Vec::new(), Vec::new());
    for (i, &(c, r)) in first.iter().enumerate() {
        let tid = id(i);
        e1.push(TruthTree { id: tid.clone(), center_m: c, radius_m: r });
        let gone = removed.contains(&i);
        if !gone {
            e2.push(TruthTree { id: tid.clone(), center_m: later_center[i], radius_m: r });
        }
        ledger_trees.push(LedgerTree {
            id: tid,
            radius_m: r,
            fate: if gone { Fate::Removed } else { Fate::Persisted },
            earlier: Some(state(c, r)),
            later: (!gone).then(|| state(later_center[i], r)),
        });
    }
    for (k, &(c, r)) in added.iter().enumerate() {
        let tid = id(n + k);
        e2.push(TruthTree { id: tid.clone(), center_m: c, radius_m: r });
        ledger_trees.push(LedgerTree { id: tid, radius_m: r, fate: Fate::Added, earlier: None, later: Some(state(c, r)) });
    }

    let attributed = |t: &LedgerTree| -> Option<String> { t.later.as_ref().or(t.earlier.as_ref()).and_then(|s| s.region.clone()) };
    let region_tallies = regions.iter().map(|r| tally(&r.id, &ledger_trees, |t| attributed(t).as_deref() == Some(r.id.as_str()))).collect();
    let ledger = Ledger {
        seed: spec.seed,
        projected_epsg: lay.crs.epsg(),
        gsd_m: spec.gsd_m,
        zoom: spec.zoom,
        epochs: [spec.epochs[0].tag.clone(), spec.epochs[1].tag.clone()],
        scene: tally("scene", &ledger_trees, |_| true),
        regions: region_tallies,
        trees: ledger_trees,
    };

    let mut rng = stream(spec.seed, STREAM_TEXTURE);
    let noise = Normal::new(0.0, 25.0).expect("finite sigma");
    let texture: Vec<f32> = (0..4 * lay.width * lay.height).map(|_| noise.sample(&mut rng) as f32).collect();

    let base_desc = SceneDescriptor {
        width: lay.width,
        height: lay.height,
        band_count: 4,
        sample_type: SampleType::U16,
        transform: lay.transform,
        acquisition_date: spec.epochs[0].date.clone(),
        nominal_gsd: spec.gsd_m,
    };
    let tiles = plan_tiles(&base_desc, spec.zoom)?;
    let plan: BTreeSet<TileIndex> = tiles.iter().copied().collect();

    let mut epochs = Vec::with_capacity(2);
    for (k, trees) in [e1, e2].into_iter().enumerate() {
        let desc = SceneDescriptor { acquisition_date: spec.epochs[k].date.clone(), ..base_desc.clone() };
        let samples = render(&lay, &trees, &texture, if k == 0 { 1.0 } else { 1.04 });
        let scene = Scene::new(desc, samples)?;
        let mut tile_annotations: BTreeMap<TileIndex, Vec<TruthPiece>> = tiles.iter().map(|t| (*t, Vec::new())).collect();
        for t in &trees {
            for (tile, polygon) in tile_pieces(&disk_ring(t.center_m, t.radius_m, None), lay.crs, spec.zoom, &plan)? {
                tile_annotations.get_mut(&tile).expect("planned tile").push(TruthPiece { tree_id: t.id.clone(), polygon });
            }
        }
        epochs.push(EpochData { tag: spec.epochs[k].tag.clone(), scene, trees, tile_annotations });
    }

    Ok(SynthScene {
        spec: spec.clone(),
        crs: lay.crs,
        transform: lay.transform,
        width: lay.width,
        height: lay.height,
        tiles,
        epochs,
        regions,
        ledger,
    })
}
