//! Planar polygon helpers shared by rasterization, georeferencing and
//! change detection. Polygons are open rings (the closing vertex is not
//! repeated) of `[x, y]` points.

use serde::{Deserialize, Serialize};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bbox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Bbox {
    pub fn of(points: &[Point]) -> Option<Bbox> {
        let first = points.first()?;
        let mut bb = Bbox {
            min_x: first[0],
            min_y: first[1],
            max_x: first[0],
            max_y: first[1],
        };
        for p in &points[1..] {
            bb.min_x = bb.min_x.min(p[0]);
            bb.min_y = bb.min_y.min(p[1]);
            bb.max_x = bb.max_x.max(p[0]);
            bb.max_y = bb.max_y.max(p[1]);
        }
        Some(bb)
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn intersects(&self, other: &Bbox) -> bool {
        self.min_x <= other.max_x
            && other.min_x <= self.max_x
            && self.min_y <= other.max_y
            && other.min_y <= self.max_y
    }

    pub fn union(&self, other: &Bbox) -> Bbox {
        Bbox {
            min_x: self.min_x.min(other.min_x),
            min_y: self.min_y.min(other.min_y),
            max_x: self.max_x.max(other.max_x),
            max_y: self.max_y.max(other.max_y),
        }
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        p[0] >= self.min_x - tol
            && p[0] <= self.max_x + tol
            && p[1] >= self.min_y - tol
            && p[1] <= self.max_y + tol
    }

    pub fn corners(&self) -> [Point; 4] {
        [
            [self.min_x, self.min_y],
            [self.max_x, self.min_y],
            [self.max_x, self.max_y],
            [self.min_x, self.max_y],
        ]
    }
}

/// Shoelace signed area, taken relative to the first vertex; positive for counter-clockwise rings in a y-up frame.
pub fn signed_area(ring: &[Point]) -> f64 {
    let n = ring.len();
    if n < 3 {
        return 0.0;
    }
    let o = ring[0];
    let mut acc = 0.0;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        acc += (a[0] - o[0]) * (b[1] - o[1]) - (b[0] - o[0]) * (a[1] - o[1]);
    }
    acc * 0.5
}

pub fn area(ring: &[Point]) -> f64 {
    signed_area(ring).abs()
}

/// Area-weighted centroid. Falls back to the vertex mean for degenerate rings.
pub fn centroid(ring: &[Point]) -> Point {
    let n = ring.len();
    let a = signed_area(ring);
    if n < 3 || a == 0.0 {
        let (sx, sy) = ring
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p[0], sy + p[1]));
        let k = n.max(1) as f64;
        return [sx / k, sy / k];
    }
    // Shift to the first vertex to limit cancellation on projected coordinates.
    let o = ring[0];
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let p = [ring[i][0] - o[0], ring[i][1] - o[1]];
        let q = [ring[(i + 1) % n][0] - o[0], ring[(i + 1) % n][1] - o[1]];
        let cross = p[0] * q[1] - q[0] * p[1];
        cx += (p[0] + q[0]) * cross;
        cy += (p[1] + q[1]) * cross;
    }
    [o[0] + cx / (6.0 * a), o[1] + cy / (6.0 * a)]
}

/// Even-odd point-in-polygon test with a half-open crossing rule: an edge
/// counts when `min(y0, y1) <= y < max(y0, y1)` and it crosses strictly to
/// the right of the point. Points on a left edge are inside, points on a
/// right edge are outside.
pub fn contains_even_odd(ring: &[Point], p: Point) -> bool {
    let n = ring.len();
    let mut inside = false;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        let (lo, hi) = if a[1] <= b[1] { (a, b) } else { (b, a) };
        if lo[1] <= p[1] && p[1] < hi[1] {
            let x = edge_x_at(lo, hi, p[1]);
            if x > p[0] {
                inside = !inside;
            }
        }
    }
    inside
}

/// x coordinate where the (non-horizontal) edge `lo -> hi` crosses `y`.
/// `lo` must be the endpoint with the smaller y. Shared by every scanline
/// routine so ties resolve identically.
#[inline]
pub fn edge_x_at(lo: Point, hi: Point, y: f64) -> f64 {
    lo[0] + (y - lo[1]) * (hi[0] - lo[0]) / (hi[1] - lo[1])
}

/// Drops consecutive duplicate vertices and a repeated closing vertex.
pub fn dedup_vertices(ring: &[Point]) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::with_capacity(ring.len());
    for &p in ring {
        if out.last() != Some(&p) {
            out.push(p);
        }
    }
    while out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    out
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

pub fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0))
        && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0))
    {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// True when no two edges of the ring touch except adjacent edges at their
/// shared vertex. Quadratic; rings here are small.
pub fn is_simple(ring: &[Point]) -> bool {
    let n = ring.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        if a == b {
            return false;
        }
        for j in (i + 1)..n {
            let c = ring[j];
            let d = ring[(j + 1) % n];
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // Adjacent edges may only share the common vertex; a fold-back
                // along the same line is an overlap.
                let (shared, p, q) = if j == i + 1 { (b, a, d) } else { (a, b, c) };
                if orient(p, shared, q) == 0.0 {
                    let dot = (p[0] - shared[0]) * (q[0] - shared[0])
                        + (p[1] - shared[1]) * (q[1] - shared[1]);
                    if dot > 0.0 {
                        return false;
                    }
                }
                continue;
            }
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// Sutherland-Hodgman clip of a ring against an axis-aligned rectangle.
pub fn clip_to_rect(ring: &[Point], rect: &Bbox) -> Vec<Point> {
    #[derive(Clone, Copy)]
    enum Side {
        Left(f64),
        Right(f64),
        Bottom(f64),
        Top(f64),
    }
    fn inside(s: Side, p: Point) -> bool {
        match s {
            Side::Left(v) => p[0] >= v,
            Side::Right(v) => p[0] <= v,
            Side::Bottom(v) => p[1] >= v,
            Side::Top(v) => p[1] <= v,
        }
    }
    fn cut(s: Side, a: Point, b: Point) -> Point {
        match s {
            Side::Left(v) | Side::Right(v) => {
                let t = (v - a[0]) / (b[0] - a[0]);
                [v, a[1] + t * (b[1] - a[1])]
            }
            Side::Bottom(v) | Side::Top(v) => {
                let t = (v - a[1]) / (b[1] - a[1]);
                [a[0] + t * (b[0] - a[0]), v]
            }
        }
    }

    let mut out = ring.to_vec();
    for side in [
        Side::Left(rect.min_x),
        Side::Right(rect.max_x),
        Side::Bottom(rect.min_y),
        Side::Top(rect.max_y),
    ] {
        if out.is_empty() {
            break;
        }
        let input = std::mem::take(&mut out);
        let n = input.len();
        for i in 0..n {
            let cur = input[i];
            let prev = input[(i + n - 1) % n];
            match (inside(side, prev), inside(side, cur)) {
                (true, true) => out.push(cur),
                (true, false) => out.push(cut(side, prev, cur)),
                (false, true) => {
                    out.push(cut(side, prev, cur));
                    out.push(cur);
                }
                (false, false) => {}
            }
        }
    }
    dedup_vertices(&out)
}

/// Whether the ring and the rectangle share any area or boundary point.
pub fn ring_intersects_rect(ring: &[Point], rect: &Bbox) -> bool {
    match Bbox::of(ring) {
        Some(bb) if bb.intersects(rect) => {}
        _ => return false,
    }
    if ring.iter().any(|&p| rect.contains(p, 0.0)) {
        return true;
    }
    let corners = rect.corners();
    if corners.iter().any(|&c| contains_even_odd(ring, c)) {
        return true;
    }
    let n = ring.len();
    (0..n).any(|i| {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        (0..4).any(|k| segments_intersect(a, b, corners[k], corners[(k + 1) % 4]))
    })
}
