use serde::{Deserialize, Serialize};

use crate::changedet::hungarian;
use crate::detections::{GridMask, TreeInstance};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_DIST_M: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchStrategy {
    #[default]
    Greedy,
    Optimal,
}

impl std::str::FromStr for MatchStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(MatchStrategy::Greedy),
            "optimal" => Ok(MatchStrategy::Optimal),
            _ => Err(Error::Validation(format!("unknown strategy {s:?} (expected greedy or optimal)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatchCriterion {
    /// Projected centroids within `max_dist`; cost is the distance.
    #[default]
    Centroid,
    /// Additionally requires outline IoU of at least `min_iou`; cost is
    /// `1 - IoU`.
    Iou { min_iou: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchOptions {
    pub max_dist: f64,
    pub strategy: MatchStrategy,
    pub criterion: MatchCriterion,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions { max_dist: DEFAULT_MAX_DIST_M, strategy: MatchStrategy::Greedy, criterion: MatchCriterion::Centroid }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Persisted,
    Gained,
    Lost,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Persisted => "persisted",
            Verdict::Gained => "gained",
            Verdict::Lost => "lost",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChangeRecord {
    pub verdict: Verdict,
    pub earlier: Option<TreeInstance>,
    pub later: Option<TreeInstance>,
    /// Centroid distance, persisted only.
    pub distance_m: Option<f64>,
    /// Later minus earlier area, persisted only.
    pub area_delta_m2: Option<f64>,
}

impl ChangeRecord {
    /// Later-epoch instance for persisted and gained, earlier for lost.
    pub fn representative(&self) -> &TreeInstance {
        self.later.as_ref().or(self.earlier.as_ref()).expect("record references an instance")
    }
}

/// Candidate pair `(earlier, later, cost)`.
pub type Candidate = (usize, usize, f64);

pub fn centroid_distance(a: &TreeInstance, b: &TreeInstance) -> f64 {
    let dx = a.centroid_m[0] - b.centroid_m[0];
    let dy = a.centroid_m[1] - b.centroid_m[1];
    (dx * dx + dy * dy).sqrt()
}

fn check_crs(earlier: &[TreeInstance], later: &[TreeInstance]) -> Result<()> {
    let mut all = earlier.iter().chain(later);
    if let Some(first) = all.next() {
        if let Some(o) = all.find(|t| t.projected_epsg != first.projected_epsg) {
            return Err(Error::Validation(format!(
                "CRS mismatch: EPSG:{} ({}) vs EPSG:{} ({})",
                first.projected_epsg, first.id, o.projected_epsg, o.id
            )));
        }
    }
    Ok(())
}

/// Pairs eligible for matching, sorted by cost then earlier id then later id.
pub fn candidates(earlier: &[TreeInstance], later: &[TreeInstance], opts: &MatchOptions) -> Result<Vec<Candidate>> {
    if !(opts.max_dist > 0.0 && opts.max_dist.is_finite()) {
        return Err(Error::Validation(format!("max_dist must be positive, got {}", opts.max_dist)));
    }
    check_crs(earlier, later)?;
    let masks = |xs: &[TreeInstance]| -> Result<Vec<GridMask>> {
        xs.iter().map(|t| Ok(GridMask::rasterize(&t.projected_polygon()?))).collect()
    };
    let (ma, mb) = match opts.criterion {
        MatchCriterion::Iou { min_iou } => {
            if !(min_iou > 0.0 && min_iou <= 1.0) {
                return Err(Error::Validation(format!("min IoU must be in (0, 1], got {min_iou}")));
            }
            (masks(earlier)?, masks(later)?)
        }
        MatchCriterion::Centroid => (Vec::new(), Vec::new()),
    };
    // Sweep over x to avoid the full cross product.
    let mut order: Vec<usize> = (0..later.len()).collect();
    order.sort_by(|&a, &b| later[a].centroid_m[0].total_cmp(&later[b].centroid_m[0]));
    let xs: Vec<f64> = order.iter().map(|&j| later[j].centroid_m[0]).collect();
    let mut out = Vec::new();
    for (i, a) in earlier.iter().enumerate() {
        let lo = xs.partition_point(|&x| x < a.centroid_m[0] - opts.max_dist);
        for &j in &order[lo..] {
            let b = &later[j];
            if b.centroid_m[0] > a.centroid_m[0] + opts.max_dist {
                break;
            }
            let d = centroid_distance(a, b);
            if d > opts.max_dist {
                continue;
            }
            match opts.criterion {
                MatchCriterion::Centroid => out.push((i, j, d)),
                MatchCriterion::Iou { min_iou } => {
                    let iou = ma[i].iou(&mb[j]);
                    if iou >= min_iou {
                        out.push((i, j, 1.0 - iou));
                    }
                }
            }
        }
    }
    out.sort_by(|x, y| {
        x.2.total_cmp(&y.2)
            .then_with(|| earlier[x.0].id.cmp(&earlier[y.0].id))
            .then_with(|| later[x.1].id.cmp(&later[y.1].id))
            .then(x.0.cmp(&y.0))
            .then(x.1.cmp(&y.1))
    });
    Ok(out)
}

/// Claims candidates in order, one-to-one.
pub fn greedy_assignment(n: usize, m: usize, cands: &[Candidate]) -> Vec<(usize, usize)> {
    let (mut ua, mut ub) = (vec![false; n], vec![false; m]);
    let mut pairs = Vec::new();
    for &(i, j, _) in cands {
        if !ua[i] && !ub[j] {
            ua[i] = true;
            ub[j] = true;
            pairs.push((i, j));
        }
    }
    pairs
}

/// Maximum-cardinality matching over the candidate graph, with minimum
/// total cost among those. Solved per connected component.
pub fn optimal_assignment(n: usize, m: usize, cands: &[Candidate]) -> Vec<(usize, usize)> {
    // union-find over earlier 0..n and later n..n+m
    let mut parent: Vec<usize> = (0..n + m).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for &(i, j, _) in cands {
        let (a, b) = (find(&mut parent, i), find(&mut parent, n + j));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut comp_of = vec![usize::MAX; n + m];
    let mut comps: Vec<Vec<Candidate>> = Vec::new();
    for &(i, j, c) in cands {
        let r = find(&mut parent, i);
        if comp_of[r] == usize::MAX {
            comp_of[r] = comps.len();
            comps.push(Vec::new());
        }
        comps[comp_of[r]].push((i, j, c));
    }
    let mut pairs = Vec::new();
    for edges in &comps {
        let mut rows: Vec<usize> = edges.iter().map(|e| e.0).collect();
        let mut cols: Vec<usize> = edges.iter().map(|e| e.1).collect();
        rows.sort_unstable();
        rows.dedup();
        cols.sort_unstable();
        cols.dedup();
        let max_cost = edges.iter().map(|e| e.2).fold(0.0f64, f64::max);
        // Leaving a row unmatched costs more than any set of real pairs, so
        // cardinality is maximised first.
        let skip = (rows.len() as f64 + 1.0) * (max_cost + 1.0);
        let width = cols.len() + rows.len();
        let mut cost = vec![vec![f64::INFINITY; width]; rows.len()];
        for (r, row) in cost.iter_mut().enumerate() {
            row[cols.len() + r] = skip;
        }
        for &(i, j, c) in edges.iter() {
            let r = rows.binary_search(&i).unwrap();
            let k = cols.binary_search(&j).unwrap();
            cost[r][k] = cost[r][k].min(c);
        }
        for (r, k) in hungarian::solve(&cost).into_iter().enumerate() {
            if k < cols.len() {
                pairs.push((rows[r], cols[k]));
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Classifies every instance of both epochs as persisted, gained or lost.
/// Records are ordered: persisted by earlier index, then lost, then gained.
pub fn match_epochs(earlier: &[TreeInstance], later: &[TreeInstance], opts: &MatchOptions) -> Result<Vec<ChangeRecord>> {
    let cands = candidates(earlier, later, opts)?;
    let mut pairs = match opts.strategy {
        MatchStrategy::Greedy => greedy_assignment(earlier.len(), later.len(), &cands),
        MatchStrategy::Optimal => optimal_assignment(earlier.len(), later.len(), &cands),
    };
    pairs.sort_unstable();
    let (mut ua, mut ub) = (vec![false; earlier.len()], vec![false; later.len()]);
    let mut out = Vec::with_capacity(earlier.len() + later.len());
    for &(i, j) in &pairs {
        ua[i] = true;
        ub[j] = true;
        let (a, b) = (&earlier[i], &later[j]);
        out.push(ChangeRecord {
            verdict: Verdict::Persisted,
            distance_m: Some(centroid_distance(a, b)),
            area_delta_m2: Some(b.area_m2 - a.area_m2),
            earlier: Some(a.clone()),
            later: Some(b.clone()),
        });
    }
    for (a, _) in earlier.iter().zip(&ua).filter(|(_, used)| !**used) {
        out.push(ChangeRecord { verdict: Verdict::Lost, earlier: Some(a.clone()), later: None, distance_m: None, area_delta_m2: None });
    }
    for (b, _) in later.iter().zip(&ub).filter(|(_, used)| !**used) {
        out.push(ChangeRecord { verdict: Verdict::Gained, earlier: None, later: Some(b.clone()), distance_m: None, area_delta_m2: None });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VerdictCounts {
    pub persisted: usize,
    pub gained: usize,
    pub lost: usize,
}

pub fn verdict_counts(records: &[ChangeRecord]) -> VerdictCounts {
    let mut c = VerdictCounts::default();
    for r in records {
        match r.verdict {
            Verdict::Persisted => c.persisted += 1,
            Verdict::Gained => c.gained += 1,
            Verdict::Lost => c.lost += 1,
        }
    }
    c
}
