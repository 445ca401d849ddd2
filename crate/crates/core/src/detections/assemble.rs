//! Scene assembly: merges duplicate and seam-split detections across tiles.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::detections::gridmask::GridMask;
use crate::detections::instance::TreeInstance;
use crate::error::{Error, Result};
use crate::geometry::Bbox;

pub const DEFAULT_DEDUPE_IOU: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssembleOptions {
    /// Instances whose 0.1 m masks reach this IoU are merged.
    pub dedupe_iou: f64,
    /// Also merge instances from disjoint sets of tiles whose masks touch,
    /// which reunites crowns cut in two by a tile edge.
    pub merge_seam_fragments: bool,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        AssembleOptions { dedupe_iou: DEFAULT_DEDUPE_IOU, merge_seam_fragments: true }
    }
}

struct Item {
    inst: TreeInstance,
    mask: GridMask,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn spatial_cmp(a: &TreeInstance, b: &TreeInstance) -> Ordering {
    let ba = Bbox::of(&a.polygon).expect("validated polygon");
    let bb = Bbox::of(&b.polygon).expect("validated polygon");
    ba.min_x
        .total_cmp(&bb.min_x)
        .then(ba.min_y.total_cmp(&bb.min_y))
        .then(b.score.total_cmp(&a.score))
        .then_with(|| a.id.cmp(&b.id))
}

fn disjoint_tiles(a: &TreeInstance, b: &TreeInstance) -> bool {
    !a.source_tiles.is_empty()
        && !b.source_tiles.is_empty()
        && a.source_tiles.iter().all(|t| !b.source_tiles.contains(t))
}

/// One round of single-linkage clustering. Returns `None` when nothing merges.
fn merge_round(items: &[Item], opts: &AssembleOptions) -> Result<Option<Vec<Item>>> {
    let n = items.len();
    let mut by_col: Vec<usize> = (0..n).collect();
    by_col.sort_by_key(|&i| (items[i].mask.extent().0, i));
    let mut parent: Vec<usize> = (0..n).collect();
    let mut merged = false;
    for (k, &i) in by_col.iter().enumerate() {
        let (_, ay0, ax1, ay1) = items[i].mask.extent();
        for &j in &by_col[k + 1..] {
            let (bx0, by0, _, by1) = items[j].mask.extent();
            if bx0 > ax1 {
                break;
            }
            if by0 > ay1 || ay0 > by1 {
                continue;
            }
            let (a, b) = (&items[i], &items[j]);
            let linked = a.mask.iou(&b.mask) >= opts.dedupe_iou
                || (opts.merge_seam_fragments && disjoint_tiles(&a.inst, &b.inst) && a.mask.touches(&b.mask));
            if linked {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                    merged = true;
                }
            }
        }
    }
    if !merged {
        return Ok(None);
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let r = find(&mut parent, i);
        groups[r].push(i);
    }
    let mut out = Vec::with_capacity(n);
    for g in groups.into_iter().filter(|g| !g.is_empty()) {
        if g.len() == 1 {
            let it = &items[g[0]];
            out.push(Item { inst: it.inst.clone(), mask: it.mask.clone() });
            continue;
        }
        let best = g
            .iter()
            .copied()
            .min_by(|&a, &b| {
                items[b].inst.score.total_cmp(&items[a].inst.score).then_with(|| items[a].inst.id.cmp(&items[b].inst.id))
            })
            .unwrap();
        let union = g.iter().skip(1).fold(items[g[0]].mask.clone(), |acc, &i| acc.union(&items[i].mask));
        let tiles: BTreeSet<String> = g.iter().flat_map(|&i| items[i].inst.source_tiles.iter().cloned()).collect();
        let b = &items[best].inst;
        let ring = union.outline();
        let inst = TreeInstance::from_projected(
            b.id.clone(),
            b.label.clone(),
            &ring,
            b.crs()?,
            b.score,
            b.epoch.clone(),
            tiles.into_iter().collect(),
        )?;
        let mask = GridMask::rasterize(&ring);
        out.push(Item { inst, mask });
    }
    Ok(Some(out))
}

/// [`assemble_scene_with`] using the default options and the given IoU.
pub fn assemble_scene(instances: &[TreeInstance], dedupe_iou: f64) -> Result<Vec<TreeInstance>> {
    assemble_scene_with(instances, &AssembleOptions { dedupe_iou, ..Default::default() })
}

/// Clusters instances by mask IoU (and seam contact), repeating until no
/// cluster links to another. A cluster keeps the id, label and score of its
/// highest-scoring member; its outline is the outer boundary of the union of
/// member masks. Singletons pass through unchanged. Output is sorted by
/// minimum longitude, minimum latitude, then descending score.
pub fn assemble_scene_with(instances: &[TreeInstance], opts: &AssembleOptions) -> Result<Vec<TreeInstance>> {
    if !(opts.dedupe_iou > 0.0 && opts.dedupe_iou <= 1.0) {
        return Err(Error::Validation(format!("dedupe IoU must be in (0, 1], got {}", opts.dedupe_iou)));
    }
    let Some(first) = instances.first() else {
        return Ok(Vec::new());
    };
    if let Some(o) = instances.iter().find(|t| t.epoch != first.epoch) {
        return Err(Error::Validation(format!("mixed epochs: {:?} and {:?}", first.epoch, o.epoch)));
    }
    if let Some(o) = instances.iter().find(|t| t.projected_epsg != first.projected_epsg) {
        return Err(Error::Validation(format!(
            "mixed projected CRS: EPSG:{} and EPSG:{}",
            first.projected_epsg, o.projected_epsg
        )));
    }
    let mut sorted: Vec<&TreeInstance> = instances.iter().collect();
    sorted.sort_by(|a, b| spatial_cmp(a, b));
    let mut items: Vec<Item> = sorted
        .par_iter()
        .map(|t| {
            Ok(Item { inst: (*t).clone(), mask: GridMask::rasterize(&t.projected_polygon()?) })
        })
        .collect::<Result<_>>()?;
    while let Some(next) = merge_round(&items, opts)? {
        items = next;
    }
    let mut out: Vec<TreeInstance> = items.into_iter().map(|i| i.inst).collect();
    out.sort_by(spatial_cmp);
    Ok(out)
}
