use serde::{Deserialize, Serialize};

use crate::annotations::InstanceMask;
use crate::error::{Error, Result};
use crate::geometry::{Bbox, Point};

/// Axis-aligned box `[x, y, w, h]` in pixels, `(x, y)` the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoxXywh {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl From<[f64; 4]> for BoxXywh {
    fn from(v: [f64; 4]) -> Self {
        BoxXywh {
            x: v[0],
            y: v[1],
            w: v[2],
            h: v[3],
        }
    }
}

impl From<BoxXywh> for [f64; 4] {
    fn from(b: BoxXywh) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

impl BoxXywh {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        BoxXywh { x, y, w, h }
    }

    pub fn enclosing(points: &[Point]) -> Option<BoxXywh> {
        let bb = Bbox::of(points)?;
        Some(BoxXywh::new(bb.min_x, bb.min_y, bb.width(), bb.height()))
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn is_valid(&self) -> bool {
        [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite()) && self.w > 0.0 && self.h > 0.0
    }
}

pub fn iou_box(a: &BoxXywh, b: &BoxXywh) -> Result<f64> {
    if !a.is_valid() || !b.is_valid() {
        return Err(Error::Validation(format!("degenerate box in IoU: {a:?} vs {b:?}")));
    }
    let iw = ((a.x + a.w).min(b.x + b.w) - a.x.max(b.x)).max(0.0);
    let ih = ((a.y + a.h).min(b.y + b.h) - a.y.max(b.y)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    Ok((inter / union).clamp(0.0, 1.0))
}

pub fn iou_mask(a: &InstanceMask, b: &InstanceMask) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::Validation(format!(
            "mask grids differ: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let inter = a.intersection_count(b);
    let union = a.area() + b.area() - inter;
    if union == 0 {
        return Err(Error::Validation("IoU of two empty masks is undefined".into()));
    }
    Ok(inter as f64 / union as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_cases() {
        let a = BoxXywh::new(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou_box(&a, &a).unwrap(), 1.0);
        assert_eq!(iou_box(&a, &BoxXywh::new(5.0, 5.0, 1.0, 1.0)).unwrap(), 0.0);
        let b = BoxXywh::new(1.0, 1.0, 2.0, 2.0);
        assert!((iou_box(&a, &b).unwrap() - 1.0 / 7.0).abs() < 1e-15);
        assert!(iou_box(&a, &BoxXywh::new(0.0, 0.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn mask_cases() {
        let full = InstanceMask::from_fn(8, 8, "t", |c, _| c < 4);
        let other = InstanceMask::from_fn(8, 8, "t", |c, _| c >= 4);
        assert_eq!(iou_mask(&full, &full).unwrap(), 1.0);
        assert_eq!(iou_mask(&full, &other).unwrap(), 0.0);
        let empty = InstanceMask::from_fn(8, 8, "t", |_, _| false);
        assert!(iou_mask(&empty, &empty).is_err());
        let small = InstanceMask::from_fn(4, 4, "t", |_, _| true);
        assert!(iou_mask(&full, &small).is_err());
    }

    #[test]
    fn rectangle_masks_agree_with_boxes() {
        let ring = |x: f64, y: f64, w: f64, h: f64| vec![[x, y], [x + w, y], [x + w, y + h], [x, y + h]];
        let (a, b) = ((3.0, 4.0, 10.0, 6.0), (7.0, 1.0, 9.0, 12.0));
        let ma = InstanceMask::rasterize(&ring(a.0, a.1, a.2, a.3), 64, 64, "t");
        let mb = InstanceMask::rasterize(&ring(b.0, b.1, b.2, b.3), 64, 64, "t");
        let bi = iou_box(&BoxXywh::new(a.0, a.1, a.2, a.3), &BoxXywh::new(b.0, b.1, b.2, b.3)).unwrap();
        assert_eq!(iou_mask(&ma, &mb).unwrap(), bi);
    }
}
