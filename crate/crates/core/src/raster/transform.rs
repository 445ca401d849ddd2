use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::crs::Crs;

/// Affine pixel-to-CRS mapping in the GDAL coefficient order:
///
/// ```text
/// x = origin_x + col * pixel_width  + row * row_rotation
/// y = origin_y + col * col_rotation + row * pixel_height
/// ```
///
/// `(col, row)` are continuous pixel coordinates; the centre of pixel
/// `(c, r)` is `(c + 0.5, r + 0.5)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoTransform {
    pub origin_x: f64,
    pub pixel_width: f64,
    pub row_rotation: f64,
    pub origin_y: f64,
    pub col_rotation: f64,
    pub pixel_height: f64,
    pub epsg: u32,
}

impl GeoTransform {
    pub fn new(coefficients: [f64; 6], epsg: u32) -> Result<Self> {
        let gt = GeoTransform {
            origin_x: coefficients[0],
            pixel_width: coefficients[1],
            row_rotation: coefficients[2],
            origin_y: coefficients[3],
            col_rotation: coefficients[4],
            pixel_height: coefficients[5],
            epsg,
        };
        gt.validate()?;
        Ok(gt)
    }

    /// North-up transform without rotation.
    pub fn north_up(origin_x: f64, origin_y: f64, pixel_size: f64, epsg: u32) -> Result<Self> {
        Self::new([origin_x, pixel_size, 0.0, origin_y, 0.0, -pixel_size], epsg)
    }

    pub fn coefficients(&self) -> [f64; 6] {
        [
            self.origin_x,
            self.pixel_width,
            self.row_rotation,
            self.origin_y,
            self.col_rotation,
            self.pixel_height,
        ]
    }

    pub fn crs(&self) -> Result<Crs> {
        Crs::from_epsg(self.epsg)
    }

    fn determinant(&self) -> f64 {
        self.pixel_width * self.pixel_height - self.row_rotation * self.col_rotation
    }

    pub fn validate(&self) -> Result<()> {
        if !self.coefficients().iter().all(|c| c.is_finite()) {
            return Err(Error::Config("geotransform has non-finite coefficients".into()));
        }
        if self.pixel_width <= 0.0 {
            return Err(Error::Config(format!(
                "pixel_width must be positive, got {}",
                self.pixel_width
            )));
        }
        if self.pixel_height == 0.0 {
            return Err(Error::Config("pixel_height must be non-zero".into()));
        }
        if self.determinant() == 0.0 {
            return Err(Error::Config("geotransform is singular".into()));
        }
        Ok(())
    }

    pub fn pixel_to_geo(&self, col: f64, row: f64) -> [f64; 2] {
        [
            self.origin_x + col * self.pixel_width + row * self.row_rotation,
            self.origin_y + col * self.col_rotation + row * self.pixel_height,
        ]
    }

    pub fn geo_to_pixel(&self, x: f64, y: f64) -> Result<[f64; 2]> {
        let det = self.determinant();
        if det == 0.0 || !det.is_finite() {
            return Err(Error::Config("geotransform is singular".into()));
        }
        let dx = x - self.origin_x;
        let dy = y - self.origin_y;
        Ok([
            (self.pixel_height * dx - self.row_rotation * dy) / det,
            (self.pixel_width * dy - self.col_rotation * dx) / det,
        ])
    }
}
