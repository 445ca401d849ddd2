use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LonLatBox {
    pub west: f64,
    pub south: f64,
    pub east: f64,
    pub north: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochSpec {
    /// Short tag used in ids and file names, e.g. `2011`.
    pub tag: String,
    /// ISO acquisition date written to the scene sidecar.
    pub date: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EditPlan {
    /// Fraction of first-epoch trees absent from the second epoch.
    pub removed: f64,
    /// New trees in the second epoch, as a fraction of the first-epoch count.
    pub added: f64,
    /// Fraction of surviving trees whose centre moves.
    pub jittered: f64,
    /// Per-axis standard deviation of the move, truncated at 3 sigma.
    pub jitter_sigma_m: f64,
}

impl Default for EditPlan {
    fn default() -> Self {
        EditPlan { removed: 0.15, added: 0.1, jittered: 0.5, jitter_sigma_m: 0.3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScoreModel {
    Constant { value: f64 },
    Uniform { low: f64, high: f64 },
    Beta { alpha: f64, beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorModel {
    pub score: ScoreModel,
    pub miss_rate: f64,
    /// Expected false positives per true tree.
    pub false_positive_rate: f64,
    /// Standard deviation of the radial outline noise, in tile pixels.
    pub boundary_noise_px: f64,
}

impl DetectorModel {
    pub fn perfect() -> Self {
        DetectorModel {
            score: ScoreModel::Uniform { low: 0.5, high: 1.0 },
            miss_rate: 0.0,
            false_positive_rate: 0.0,
            boundary_noise_px: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("miss_rate", self.miss_rate), ("false_positive_rate", self.false_positive_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("detector {name} must be in [0, 1], got {v}")));
            }
        }
        if !(self.boundary_noise_px >= 0.0 && self.boundary_noise_px.is_finite()) {
            return Err(Error::Config("detector boundary_noise_px must be >= 0".into()));
        }
        let ok = match self.score {
            ScoreModel::Constant { value } => (0.0..=1.0).contains(&value),
            ScoreModel::Uniform { low, high } => 0.0 <= low && low < high && high <= 1.0,
            ScoreModel::Beta { alpha, beta } => alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite(),
        };
        if !ok {
            return Err(Error::Config(format!("invalid score model {:?}", self.score)));
        }
        Ok(())
    }
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self::perfect()
    }
}

fn default_epochs() -> [EpochSpec; 2] {
    [
        EpochSpec { tag: "2011".into(), date: "2011-11-10".into() },
        EpochSpec { tag: "2018".into(), date: "2018-03-02".into() },
    ]
}

fn default_zoom() -> u8 {
    18
}

fn default_regions() -> usize {
    5
}

fn default_spacing() -> f64 {
    12.0
}

/// Everything needed to generate a synthetic two-epoch scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub extent: LonLatBox,
    pub gsd_m: f64,
    pub tree_count: usize,
    /// `[min, max]` crown radius, metres.
    pub crown_radius_m: [f64; 2],
    /// Minimum distance between any two tree centres, across both epochs.
    #[serde(default = "default_spacing")]
    pub min_spacing_m: f64,
    #[serde(default = "default_epochs")]
    pub epochs: [EpochSpec; 2],
    #[serde(default)]
    pub edits: EditPlan,
    #[serde(default)]
    pub detector: DetectorModel,
    #[serde(default = "default_zoom")]
    pub zoom: u8,
    /// Number of report regions laid out as strips across the scene.
    #[serde(default = "default_regions")]
    pub regions: usize,
}

impl SynthSpec {
    /// A scene of roughly 400 m x 400 m near Ahmedabad with 200 trees.
    pub fn demo(seed: u64) -> Self {
        SynthSpec {
            seed,
            extent: LonLatBox { west: 72.5500, south: 23.0200, east: 72.5539, north: 23.0236 },
            gsd_m: 0.5,
            tree_count: 200,
            crown_radius_m: [2.0, 3.5],
            min_spacing_m: default_spacing(),
            epochs: default_epochs(),
            edits: EditPlan::default(),
            detector: DetectorModel::perfect(),
            zoom: default_zoom(),
            regions: default_regions(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: SynthSpec = serde_json::from_str(text).map_err(|e| Error::json("synth spec", &e))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("spec serializes");
        s.push('\n');
        s
    }

    /// Largest distance a jittered centre can move.
    pub fn max_jitter_m(&self) -> f64 {
        3.0 * self.edits.jitter_sigma_m * std::f64::consts::SQRT_2
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.extent;
        let finite = [e.west, e.south, e.east, e.north].iter().all(|v| v.is_finite());
        if !finite || !(e.west < e.east && e.south < e.north) {
            return Err(Error::Config("extent must satisfy west < east and south < north".into()));
        }
        if e.west < -180.0 || e.east > 180.0 || e.south < -80.0 || e.north > 84.0 {
            return Err(Error::Config("extent must lie within the UTM latitude band and [-180, 180]".into()));
        }
        if !(self.gsd_m > 0.0 && self.gsd_m.is_finite()) {
            return Err(Error::Config("gsd_m must be positive".into()));
        }
        let [rmin, rmax] = self.crown_radius_m;
        if !(rmin > 0.0 && rmin <= rmax && rmax.is_finite()) {
            return Err(Error::Config("crown_radius_m must satisfy 0 < min <= max".into()));
        }
        let ed = &self.edits;
        for (name, v) in [("removed", ed.removed), ("added", ed.added), ("jittered", ed.jittered)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("edit fraction {name} must be in [0, 1], got {v}")));
            }
        }
        if !(ed.jitter_sigma_m >= 0.0 && ed.jitter_sigma_m.is_finite()) {
            return Err(Error::Config("jitter_sigma_m must be >= 0".into()));
        }
        let need = 2.0 * rmax + 2.0 * self.max_jitter_m() + 1.0;
        if !(self.min_spacing_m >= need) {
            return Err(Error::Config(format!(
                "min_spacing_m {} is below {need:.3} (crowns could touch after jitter)",
                self.min_spacing_m
            )));
        }
        if self.epochs[0].tag.is_empty() || self.epochs[0].tag == self.epochs[1].tag {
            return Err(Error::Config("epoch tags must be non-empty and distinct".into()));
        }
        if self.zoom > 22 {
            return Err(Error::Config(format!("zoom {} is unreasonably deep", self.zoom)));
        }
        self.detector.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_round_trips_and_validates() {
        let s = SynthSpec::demo(1);
        s.validate().unwrap();
        assert_eq!(SynthSpec::from_json(&s.to_json()).unwrap(), s);
    }

    #[test]
    fn defaults_fill_optional_fields() {
        let text = r#"{"seed":1,"extent":{"west":72.55,"south":23.02,"east":72.552,"north":23.022},
            "gsd_m":0.5,"tree_count":3,"crown_radius_m":[2.0,3.0]}"#;
        let s = SynthSpec::from_json(text).unwrap();
        assert_eq!(s.zoom, 18);
        assert_eq!(s.epochs[1].tag, "2018");
    }

    #[test]
    fn rejects_bad_values() {
        let mut s = SynthSpec::demo(1);
        s.edits.removed = 1.5;
        assert!(s.validate().is_err());
        let mut s = SynthSpec::demo(1);
        s.min_spacing_m = 3.0;
        assert!(s.validate().is_err());
        let mut s = SynthSpec::demo(1);
        s.extent.east = s.extent.west;
        assert!(s.validate().is_err());
        assert!(SynthSpec::from_json(r#"{"seed":1,"bogus":2}"#).is_err());
    }
}
