use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LEARNING_RATES: [f64; 2] = [0.01, 0.03];
pub const EPOCHS: u32 = 500;
pub const BATCH_SIZES: [u32; 2] = [16, 32];
pub const MOMENTUM: f64 = 0.938;
pub const WEIGHT_DECAYS: [f64; 2] = [0.0005, 0.001];
pub const MASK_RATIO: f64 = 0.4;
pub const ANCHORS_PER_IMAGE: [u32; 2] = [4, 8];

/// Training hyperparameters. Field names double as config-file keys.
///
/// `mask_ratio` and `anchors_per_image` are carried for completeness; no
/// kernel in this crate consumes them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: u32,
    pub batch_size: u32,
    pub momentum: f64,
    pub weight_decay: f64,
    #[serde(default = "default_optimizer")]
    pub optimizer: String,
    pub mask_ratio: f64,
    pub anchors_per_image: u32,
    /// Accept values outside the reference sets.
    #[serde(default)]
    pub allow_nonstandard: bool,
}

fn default_optimizer() -> String {
    "SGD".into()
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: LEARNING_RATES[0],
            epochs: EPOCHS,
            batch_size: BATCH_SIZES[0],
            momentum: MOMENTUM,
            weight_decay: WEIGHT_DECAYS[0],
            optimizer: default_optimizer(),
            mask_ratio: MASK_RATIO,
            anchors_per_image: ANCHORS_PER_IMAGE[0],
            allow_nonstandard: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let reals = [
            ("learning_rate", self.learning_rate),
            ("momentum", self.momentum),
            ("weight_decay", self.weight_decay),
            ("mask_ratio", self.mask_ratio),
        ];
        for (name, v) in reals {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("anchors_per_image", self.anchors_per_image),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.optimizer != "SGD" {
            return Err(Error::Config(format!("optimizer {:?} is not supported (SGD only)", self.optimizer)));
        }
        if self.allow_nonstandard {
            return Ok(());
        }
        let off = |name: &str, v: String, allowed: String| {
            Err(Error::Config(format!(
                "{name} = {v} is outside the reference values {allowed}; set allow_nonstandard = true to override"
            )))
        };
        if !LEARNING_RATES.contains(&self.learning_rate) {
            return off("learning_rate", self.learning_rate.to_string(), format!("{LEARNING_RATES:?}"));
        }
        if self.epochs != EPOCHS {
            return off("epochs", self.epochs.to_string(), format!("[{EPOCHS}]"));
        }
        if !BATCH_SIZES.contains(&self.batch_size) {
            return off("batch_size", self.batch_size.to_string(), format!("{BATCH_SIZES:?}"));
        }
        if self.momentum != MOMENTUM {
            return off("momentum", self.momentum.to_string(), format!("[{MOMENTUM}]"));
        }
        if !WEIGHT_DECAYS.contains(&self.weight_decay) {
            return off("weight_decay", self.weight_decay.to_string(), format!("{WEIGHT_DECAYS:?}"));
        }
        if self.mask_ratio != MASK_RATIO {
            return off("mask_ratio", self.mask_ratio.to_string(), format!("[{MASK_RATIO}]"));
        }
        if !ANCHORS_PER_IMAGE.contains(&self.anchors_per_image) {
            return off("anchors_per_image", self.anchors_per_image.to_string(), format!("{ANCHORS_PER_IMAGE:?}"));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| Error::Config(format!("train config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("train config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_defaults_validate() {
        TrainConfig::default().validate().unwrap();
        let back = TrainConfig::from_toml(&TrainConfig::default().to_toml()).unwrap();
        assert_eq!(back, TrainConfig::default());
    }

    #[test]
    fn allowed_sets_and_override() {
        let mut c = TrainConfig { learning_rate: 0.1, ..Default::default() };
        assert!(c.validate().unwrap_err().to_string().contains("learning_rate"));
        c.allow_nonstandard = true;
        c.validate().unwrap();
        let c = TrainConfig { batch_size: 32, weight_decay: 0.001, anchors_per_image: 8, learning_rate: 0.03, ..Default::default() };
        c.validate().unwrap();
        let c = TrainConfig { momentum: -1.0, allow_nonstandard: true, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{}\nbeta2 = 0.9\n", TrainConfig::default().to_toml());
        assert!(TrainConfig::from_toml(&text).is_err());
    }
}
