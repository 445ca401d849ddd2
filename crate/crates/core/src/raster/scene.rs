//! Scene container: band-sequential raw samples (`<name>.raw`, little-endian
//! for 16-bit) plus a JSON sidecar (`<name>.scene.json`).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Bbox, Point};
use crate::raster::transform::GeoTransform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleType {
    U8,
    U16,
}

impl SampleType {
    pub fn bytes(self) -> usize {
        match self {
            SampleType::U8 => 1,
            SampleType::U16 => 2,
        }
    }
}

/// Sidecar document, field names fixed by the on-disk format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    width: usize,
    height: usize,
    bands: usize,
    dtype: SampleType,
    geotransform: [f64; 6],
    epsg: u32,
    date: String,
    gsd_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneDescriptor {
    pub width: usize,
    pub height: usize,
    pub band_count: usize,
    pub sample_type: SampleType,
    pub transform: GeoTransform,
    pub acquisition_date: String,
    pub nominal_gsd: f64,
}

impl SceneDescriptor {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.band_count == 0 {
            return Err(Error::Validation(format!(
                "scene dimensions must be positive (width {}, height {}, bands {})",
                self.width, self.height, self.band_count
            )));
        }
        if !(self.nominal_gsd > 0.0) {
            return Err(Error::Validation(format!(
                "gsd_m must be positive, got {}",
                self.nominal_gsd
            )));
        }
        self.transform.validate()?;
        self.transform.crs()?;
        validate_iso_date(&self.acquisition_date)?;
        let bb = self.projected_bbox();
        let finite = [bb.min_x, bb.min_y, bb.max_x, bb.max_y]
            .iter()
            .all(|v| v.is_finite());
        if !finite || bb.width() <= 0.0 || bb.height() <= 0.0 {
            return Err(Error::Validation("scene bounding box is degenerate".into()));
        }
        Ok(())
    }

    pub fn samples_per_band(&self) -> usize {
        self.width * self.height
    }

    /// Corner ring of the raster in its own CRS.
    pub fn corners(&self) -> [Point; 4] {
        let (w, h) = (self.width as f64, self.height as f64);
        [
            self.transform.pixel_to_geo(0.0, 0.0),
            self.transform.pixel_to_geo(w, 0.0),
            self.transform.pixel_to_geo(w, h),
            self.transform.pixel_to_geo(0.0, h),
        ]
    }

    pub fn projected_bbox(&self) -> Bbox {
        Bbox::of(&self.corners()).expect("four corners")
    }

    /// Footprint as a lon/lat ring, each raster edge densified to `per_edge`
    /// segments so curved edges survive the reprojection.
    pub fn footprint_lonlat(&self, per_edge: usize) -> Result<Vec<Point>> {
        let crs = self.transform.crs()?;
        let corners = self.corners();
        let mut ring = Vec::with_capacity(4 * per_edge);
        for k in 0..4 {
            let a = corners[k];
            let b = corners[(k + 1) % 4];
            for s in 0..per_edge {
                let t = s as f64 / per_edge as f64;
                let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                ring.push(crs.to_lonlat(p[0], p[1]));
            }
        }
        Ok(ring)
    }

    fn to_sidecar(&self) -> Sidecar {
        Sidecar {
            width: self.width,
            height: self.height,
            bands: self.band_count,
            dtype: self.sample_type,
            geotransform: self.transform.coefficients(),
            epsg: self.transform.epsg,
            date: self.acquisition_date.clone(),
            gsd_m: self.nominal_gsd,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_sidecar()).expect("sidecar serializes")
    }

    pub fn from_json(text: &str, context: &str) -> Result<Self> {
        let sc: Sidecar = serde_json::from_str(text).map_err(|e| Error::json(context, &e))?;
        let transform = GeoTransform {
            origin_x: sc.geotransform[0],
            pixel_width: sc.geotransform[1],
            row_rotation: sc.geotransform[2],
            origin_y: sc.geotransform[3],
            col_rotation: sc.geotransform[4],
            pixel_height: sc.geotransform[5],
            epsg: sc.epsg,
        };
        let desc = SceneDescriptor {
            width: sc.width,
            height: sc.height,
            band_count: sc.bands,
            sample_type: sc.dtype,
            transform,
            acquisition_date: sc.date,
            nominal_gsd: sc.gsd_m,
        };
        desc.validate()?;
        Ok(desc)
    }
}

fn validate_iso_date(date: &str) -> Result<()> {
    let bad = || Error::Validation(format!("acquisition date {date:?} is not ISO-8601"));
    let day = date.get(..10).ok_or_else(bad)?;
    let b = day.as_bytes();
    let digits = |r: std::ops::Range<usize>| b[r].iter().all(u8::is_ascii_digit);
    if !(digits(0..4) && b[4] == b'-' && digits(5..7) && b[7] == b'-' && digits(8..10)) {
        return Err(bad());
    }
    let month: u32 = day[5..7].parse().map_err(|_| bad())?;
    let dom: u32 = day[8..10].parse().map_err(|_| bad())?;
    if !(1..=12).contains(&month) || !(1..=31).contains(&dom) {
        return Err(bad());
    }
    if date.len() > 10 && !date[10..].starts_with('T') {
        return Err(bad());
    }
    Ok(())
}

/// Descriptor plus band-sequential samples (widened to u16).
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub descriptor: SceneDescriptor,
    pub samples: Vec<u16>,
}

impl Scene {
    pub fn new(descriptor: SceneDescriptor, samples: Vec<u16>) -> Result<Self> {
        descriptor.validate()?;
        let expected = descriptor.samples_per_band() * descriptor.band_count;
        if samples.len() != expected {
            return Err(Error::Validation(format!(
                "scene payload has {} samples, descriptor requires {expected}",
                samples.len()
            )));
        }
        if descriptor.sample_type == SampleType::U8 && samples.iter().any(|&s| s > 255) {
            return Err(Error::Validation("u8 scene holds samples above 255".into()));
        }
        Ok(Scene {
            descriptor,
            samples,
        })
    }

    pub fn band(&self, b: usize) -> &[u16] {
        let n = self.descriptor.samples_per_band();
        &self.samples[b * n..(b + 1) * n]
    }

    /// Sample at integer pixel `(col, row)` of band `b`.
    #[inline]
    pub fn sample(&self, b: usize, col: usize, row: usize) -> u16 {
        let d = &self.descriptor;
        self.samples[b * d.samples_per_band() + row * d.width + col]
    }

    /// Reads `<stem>.scene.json` and `<stem>.raw`. Accepts the path of either
    /// file or the shared stem.
    pub fn read(path: &Path) -> Result<Self> {
        let (sidecar, raw) = scene_paths(path);
        let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let descriptor = SceneDescriptor::from_json(&text, &sidecar.display().to_string())?;
        let bytes = fs::read(&raw).map_err(|e| Error::io(&raw, e))?;
        let n = descriptor.samples_per_band() * descriptor.band_count;
        let want = n * descriptor.sample_type.bytes();
        if bytes.len() != want {
            return Err(Error::Validation(format!(
                "{} holds {} bytes, descriptor requires {want}",
                raw.display(),
                bytes.len()
            )));
        }
        let samples = match descriptor.sample_type {
            SampleType::U8 => bytes.iter().map(|&b| b as u16).collect(),
            SampleType::U16 => bytes
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]))
                .collect(),
        };
        Scene::new(descriptor, samples)
    }

    /// Writes both files next to `stem` and returns their paths.
    pub fn write(&self, stem: &Path) -> Result<(PathBuf, PathBuf)> {
        let (sidecar, raw) = scene_paths(stem);
        fs::write(&sidecar, self.descriptor.to_json()).map_err(|e| Error::io(&sidecar, e))?;
        fs::write(&raw, encode_samples(&self.samples, self.descriptor.sample_type))
            .map_err(|e| Error::io(&raw, e))?;
        Ok((sidecar, raw))
    }
}

pub fn encode_samples(samples: &[u16], dtype: SampleType) -> Vec<u8> {
    match dtype {
        SampleType::U8 => samples.iter().map(|&s| s as u8).collect(),
        SampleType::U16 => samples.iter().flat_map(|s| s.to_le_bytes()).collect(),
    }
}

/// `(sidecar, raw)` paths for a scene given either file or the bare stem.
pub fn scene_paths(path: &Path) -> (PathBuf, PathBuf) {
    let s = path.to_string_lossy();
    let stem = s
        .strip_suffix(".scene.json")
        .or_else(|| s.strip_suffix(".raw"))
        .unwrap_or(&s)
        .to_string();
    (
        PathBuf::from(format!("{stem}.scene.json")),
        PathBuf::from(format!("{stem}.raw")),
    )
}
