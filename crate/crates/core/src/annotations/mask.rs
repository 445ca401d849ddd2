//! Polygon rasterization. A pixel `(c, r)` is set iff its centre
//! `(c + 0.5, r + 0.5)` lies inside the ring under the even-odd rule; centres
//! exactly on an edge follow the top-left convention (left and top edges in,
//! right and bottom edges out).

use crate::annotations::labelme::PolygonAnnotation;
use crate::error::{Error, Result};
use crate::geometry::{edge_x_at, Bbox, Point};

/// Calls `span(row, start_col, end_col)` for each run of set pixels, with
/// `end_col` exclusive. Rows are visited top to bottom.
pub fn scanline_spans(ring: &[Point], width: usize, height: usize, mut span: impl FnMut(usize, usize, usize)) {
    let Some(bb) = Bbox::of(ring) else { return };
    if ring.len() < 3 || width == 0 || height == 0 {
        return;
    }
    let first = (bb.min_y - 0.5).floor().max(0.0);
    let last = (bb.max_y - 0.5).ceil().min(height as f64 - 1.0);
    if !(first <= last) {
        return;
    }
    let n = ring.len();
    let mut xs: Vec<f64> = Vec::with_capacity(8);
    for row in first as usize..=last as usize {
        let yc = row as f64 + 0.5;
        xs.clear();
        for i in 0..n {
            let a = ring[i];
            let b = ring[(i + 1) % n];
            let (lo, hi) = if a[1] <= b[1] { (a, b) } else { (b, a) };
            if lo[1] <= yc && yc < hi[1] {
                xs.push(edge_x_at(lo, hi, yc));
            }
        }
        xs.sort_by(|a, b| a.total_cmp(b));
        for pair in xs.chunks_exact(2) {
            let start = first_centre_at_or_after(pair[0], width);
            let end = first_centre_at_or_after(pair[1], width);
            if start < end {
                span(row, start, end);
            }
        }
    }
}

/// Smallest column `c` in `[0, width]` with `c + 0.5 >= x`.
fn first_centre_at_or_after(x: f64, width: usize) -> usize {
    if x.is_nan() || x <= 0.5 {
        return 0;
    }
    if x > width as f64 - 0.5 {
        return width;
    }
    let mut c = (x - 0.5).ceil() as usize;
    while c > 0 && (c - 1) as f64 + 0.5 >= x {
        c -= 1;
    }
    while c < width && (c as f64 + 0.5) < x {
        c += 1;
    }
    c
}

/// Binary mask on a `width x height` grid, stored as the tight window
/// around its set pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceMask {
    width: usize,
    height: usize,
    x0: usize,
    y0: usize,
    win_w: usize,
    win_h: usize,
    bits: Vec<bool>,
    area: usize,
    pub image_id: String,
}

impl InstanceMask {
    /// Builds a mask from a predicate over the whole grid.
    pub fn from_fn(width: usize, height: usize, image_id: impl Into<String>, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut spans = Vec::new();
        for row in 0..height {
            let mut col = 0;
            while col < width {
                if f(col, row) {
                    let s = col;
                    while col < width && f(col, row) {
                        col += 1;
                    }
                    spans.push((row, s, col));
                } else {
                    col += 1;
                }
            }
        }
        Self::from_spans(width, height, image_id.into(), &spans)
    }

    fn from_spans(width: usize, height: usize, image_id: String, spans: &[(usize, usize, usize)]) -> Self {
        if spans.is_empty() {
            return InstanceMask {
                width,
                height,
                x0: 0,
                y0: 0,
                win_w: 0,
                win_h: 0,
                bits: Vec::new(),
                area: 0,
                image_id,
            };
        }
        let y0 = spans.iter().map(|s| s.0).min().unwrap();
        let y1 = spans.iter().map(|s| s.0).max().unwrap() + 1;
        let x0 = spans.iter().map(|s| s.1).min().unwrap();
        let x1 = spans.iter().map(|s| s.2).max().unwrap();
        let (win_w, win_h) = (x1 - x0, y1 - y0);
        let mut bits = vec![false; win_w * win_h];
        for &(row, s, e) in spans {
            let base = (row - y0) * win_w;
            for c in s..e {
                bits[base + c - x0] = true;
            }
        }
        let area = bits.iter().filter(|&&b| b).count();
        InstanceMask {
            width,
            height,
            x0,
            y0,
            win_w,
            win_h,
            bits,
            area,
            image_id,
        }
    }

    /// Rasterizes any ring without the non-empty check.
    pub fn rasterize(ring: &[Point], width: usize, height: usize, image_id: impl Into<String>) -> Self {
        let mut spans = Vec::new();
        scanline_spans(ring, width, height, |r, s, e| spans.push((r, s, e)));
        Self::from_spans(width, height, image_id.into(), &spans)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn area(&self) -> usize {
        self.area
    }

    pub fn is_empty(&self) -> bool {
        self.area == 0
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> bool {
        if col < self.x0 || row < self.y0 || col >= self.x0 + self.win_w || row >= self.y0 + self.win_h {
            return false;
        }
        self.bits[(row - self.y0) * self.win_w + col - self.x0]
    }

    /// `(x0, y0, x1, y1)` window of set pixels, exclusive upper bounds.
    pub fn window(&self) -> (usize, usize, usize, usize) {
        (self.x0, self.y0, self.x0 + self.win_w, self.y0 + self.win_h)
    }

    /// Number of pixels set in both masks. Grids must match.
    pub fn intersection_count(&self, other: &InstanceMask) -> usize {
        let (ax0, ay0, ax1, ay1) = self.window();
        let (bx0, by0, bx1, by1) = other.window();
        let (x0, y0) = (ax0.max(bx0), ay0.max(by0));
        let (x1, y1) = (ax1.min(bx1), ay1.min(by1));
        let mut n = 0;
        for row in y0..y1 {
            for col in x0..x1 {
                if self.get(col, row) && other.get(col, row) {
                    n += 1;
                }
            }
        }
        n
    }

    /// Whether any set pixel of `self` is 4-adjacent to, or coincides with,
    /// a set pixel of `other`.
    pub fn touches(&self, other: &InstanceMask) -> bool {
        let (ax0, ay0, ax1, ay1) = self.window();
        let (bx0, by0, bx1, by1) = other.window();
        if self.is_empty() || other.is_empty() || ax1 < bx0 || bx1 < ax0 || ay1 < by0 || by1 < ay0 {
            return false;
        }
        for row in ay0..ay1 {
            for col in ax0..ax1 {
                if !self.get(col, row) {
                    continue;
                }
                if other.get(col, row)
                    || other.get(col + 1, row)
                    || other.get(col, row + 1)
                    || (col > 0 && other.get(col - 1, row))
                    || (row > 0 && other.get(col, row - 1))
                {
                    return true;
                }
            }
        }
        false
    }

    /// Pixel-wise union with a mask on the same grid.
    pub fn union(&self, other: &InstanceMask) -> InstanceMask {
        let (ax0, ay0, ax1, ay1) = self.window();
        let (bx0, by0, bx1, by1) = other.window();
        let (x0, y0) = (ax0.min(bx0), ay0.min(by0));
        let (x1, y1) = (ax1.max(bx1), ay1.max(by1));
        let mut spans = Vec::new();
        for row in y0..y1 {
            let mut col = x0;
            while col < x1 {
                if self.get(col, row) || other.get(col, row) {
                    let s = col;
                    while col < x1 && (self.get(col, row) || other.get(col, row)) {
                        col += 1;
                    }
                    spans.push((row, s, col));
                } else {
                    col += 1;
                }
            }
        }
        Self::from_spans(self.width, self.height, self.image_id.clone(), &spans)
    }
}

/// Rasterizes an annotation onto a `width x height` grid.
pub fn polygon_to_mask(annotation: &PolygonAnnotation, width: usize, height: usize) -> Result<InstanceMask> {
    let mask = InstanceMask::rasterize(&annotation.vertices, width, height, annotation.image_id.clone());
    if mask.is_empty() {
        return Err(Error::Validation(format!(
            "polygon in {} covers no pixel centre (zero area after rasterization)",
            annotation.image_id
        )));
    }
    Ok(mask)
}
