//! Binary masks on an absolute 0.1 m grid in a projected CRS.
//!
//! Cell `(i, j)` covers `[i g, (i + 1) g) x [j g, (j + 1) g)` with `g` the
//! cell size, so masks of different polygons share one lattice and can be
//! compared without resampling.

use std::collections::BTreeMap;

use crate::annotations::scanline_spans;
use crate::geometry::{signed_area, Bbox, Point};

pub const GRID_M: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMask {
    row0: i64,
    /// Sorted, disjoint, non-adjacent `[start, end)` column spans per row.
    rows: Vec<Vec<(i64, i64)>>,
    area: u64,
    min_col: i64,
    max_col: i64,
}

fn normalize(spans: &mut Vec<(i64, i64)>) {
    spans.sort_unstable();
    let mut out: Vec<(i64, i64)> = Vec::with_capacity(spans.len());
    for &(s, e) in spans.iter() {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    *spans = out;
}

impl GridMask {
    fn from_rows(row0: i64, mut rows: Vec<Vec<(i64, i64)>>) -> GridMask {
        rows.iter_mut().for_each(normalize);
        let lead = rows.iter().take_while(|r| r.is_empty()).count();
        let trail = rows.iter().rev().take_while(|r| r.is_empty()).count();
        if lead == rows.len() {
            return GridMask { row0: 0, rows: Vec::new(), area: 0, min_col: 0, max_col: 0 };
        }
        rows.truncate(rows.len() - trail);
        rows.drain(..lead);
        let area = rows.iter().flatten().map(|(s, e)| (e - s) as u64).sum();
        let min_col = rows.iter().filter_map(|r| r.first()).map(|s| s.0).min().unwrap();
        let max_col = rows.iter().filter_map(|r| r.last()).map(|s| s.1).max().unwrap();
        GridMask { row0: row0 + lead as i64, rows, area, min_col, max_col }
    }

    /// Cells whose centres lie inside `ring` (metres), by the same rule as
    /// tile rasterization.
    pub fn rasterize(ring: &[Point]) -> GridMask {
        let Some(bb) = Bbox::of(ring) else {
            return GridMask::from_rows(0, Vec::new());
        };
        let ix0 = (bb.min_x / GRID_M).floor() as i64 - 1;
        let iy0 = (bb.min_y / GRID_M).floor() as i64 - 1;
        let w = ((bb.max_x / GRID_M).ceil() as i64 - ix0 + 1) as usize;
        let h = ((bb.max_y / GRID_M).ceil() as i64 - iy0 + 1) as usize;
        let local: Vec<Point> = ring
            .iter()
            .map(|p| [p[0] / GRID_M - ix0 as f64, p[1] / GRID_M - iy0 as f64])
            .collect();
        let mut rows = vec![Vec::new(); h];
        scanline_spans(&local, w, h, |r, s, e| rows[r].push((s as i64 + ix0, e as i64 + ix0)));
        GridMask::from_rows(iy0, rows)
    }

    pub fn area(&self) -> u64 {
        self.area
    }

    pub fn area_m2(&self) -> f64 {
        self.area as f64 * GRID_M * GRID_M
    }

    pub fn is_empty(&self) -> bool {
        self.area == 0
    }

    /// `(min_col, min_row, max_col, max_row)`, max exclusive.
    pub fn extent(&self) -> (i64, i64, i64, i64) {
        (self.min_col, self.row0, self.max_col, self.row0 + self.rows.len() as i64)
    }

    fn row(&self, j: i64) -> &[(i64, i64)] {
        let k = j - self.row0;
        if k < 0 || k >= self.rows.len() as i64 {
            &[]
        } else {
            &self.rows[k as usize]
        }
    }

    pub fn intersection(&self, other: &GridMask) -> u64 {
        let mut n = 0u64;
        for (k, row) in self.rows.iter().enumerate() {
            let theirs = other.row(self.row0 + k as i64);
            let (mut a, mut b) = (0, 0);
            while a < row.len() && b < theirs.len() {
                let lo = row[a].0.max(theirs[b].0);
                let hi = row[a].1.min(theirs[b].1);
                if lo < hi {
                    n += (hi - lo) as u64;
                }
                if row[a].1 < theirs[b].1 {
                    a += 1;
                } else {
                    b += 1;
                }
            }
        }
        n
    }

    pub fn iou(&self, other: &GridMask) -> f64 {
        let inter = self.intersection(other);
        let union = self.area + other.area - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// True when the masks share a cell or have 4-adjacent cells.
    pub fn touches(&self, other: &GridMask) -> bool {
        if self.is_empty() || other.is_empty() {
            return false;
        }
        let (ax0, ay0, ax1, ay1) = self.extent();
        let (bx0, by0, bx1, by1) = other.extent();
        if ax1 < bx0 || bx1 < ax0 || ay1 < by0 || by1 < ay0 {
            return false;
        }
        for (k, row) in self.rows.iter().enumerate() {
            let j = self.row0 + k as i64;
            for &(s, e) in row {
                // same row: closed intervals meet when spans overlap or abut
                if other.row(j).iter().any(|&(s2, e2)| s <= e2 && s2 <= e) {
                    return true;
                }
                for dj in [-1, 1] {
                    if other.row(j + dj).iter().any(|&(s2, e2)| s < e2 && s2 < e) {
                        return true;
                    }
                }
            }
        }
        false
    }

    pub fn union(&self, other: &GridMask) -> GridMask {
        if self.is_empty() {
            return other.clone();
        }
        if other.is_empty() {
            return self.clone();
        }
        let row0 = self.row0.min(other.row0);
        let end = (self.row0 + self.rows.len() as i64).max(other.row0 + other.rows.len() as i64);
        let rows = (row0..end)
            .map(|j| self.row(j).iter().chain(other.row(j)).copied().collect())
            .collect();
        GridMask::from_rows(row0, rows)
    }

    fn filled(&self, i: i64, j: i64) -> bool {
        self.row(j).iter().any(|&(s, e)| s <= i && i < e)
    }

    /// Outer boundary of the largest 4-connected part, in metres, counter-
    /// clockwise, without collinear vertices. Holes are not represented.
    pub fn outline(&self) -> Vec<Point> {
        // Directed cell edges with the filled side on the left.
        let mut out: BTreeMap<(i64, i64), Vec<(i64, i64)>> = BTreeMap::new();
        let mut add = |a: (i64, i64), b: (i64, i64)| out.entry(a).or_default().push(b);
        for (k, row) in self.rows.iter().enumerate() {
            let j = self.row0 + k as i64;
            for &(s, e) in row {
                for i in s..e {
                    if !self.filled(i, j - 1) {
                        add((i, j), (i + 1, j));
                    }
                    if !self.filled(i + 1, j) {
                        add((i + 1, j), (i + 1, j + 1));
                    }
                    if !self.filled(i, j + 1) {
                        add((i + 1, j + 1), (i, j + 1));
                    }
                    if !self.filled(i - 1, j) {
                        add((i, j + 1), (i, j));
                    }
                }
            }
        }
        let mut best: Vec<Point> = Vec::new();
        let mut best_area = 0.0;
        loop {
            // lowest-then-leftmost start is never a pinch vertex
            let Some(start) = out
                .iter()
                .filter(|(_, v)| !v.is_empty())
                .map(|(k, _)| *k)
                .min_by_key(|&(i, j)| (j, i))
            else {
                break;
            };
            let mut ring = vec![start];
            let mut prev = start;
            let mut cur = out.get_mut(&start).unwrap().remove(0);
            while cur != start {
                ring.push(cur);
                let d = (cur.0 - prev.0, cur.1 - prev.1);
                let cands = out.get_mut(&cur).expect("boundary edges form closed loops");
                let prefer = [(-d.1, d.0), d, (d.1, -d.0)];
                let pick = prefer
                    .iter()
                    .find_map(|dir| cands.iter().position(|&n| (n.0 - cur.0, n.1 - cur.1) == *dir))
                    .expect("boundary edges form closed loops");
                let next = cands.remove(pick);
                prev = cur;
                cur = next;
            }
            let ring = drop_collinear(&ring);
            let pts: Vec<Point> = ring.iter().map(|&(i, j)| [i as f64 * GRID_M, j as f64 * GRID_M]).collect();
            let a = signed_area(&pts);
            if a > best_area {
                best_area = a;
                best = pts;
            }
        }
        best
    }
}

fn drop_collinear(ring: &[(i64, i64)]) -> Vec<(i64, i64)> {
    let n = ring.len();
    (0..n)
        .filter(|&k| {
            let a = ring[(k + n - 1) % n];
            let b = ring[k];
            let c = ring[(k + 1) % n];
            (b.0 - a.0) * (c.1 - b.1) - (b.1 - a.1) * (c.0 - b.0) != 0
        })
        .map(|k| ring[k])
        .collect()
}
