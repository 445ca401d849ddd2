use crate::error::{Error, Result};

/// Linear percentile stretch from 16-bit samples to 8-bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stretch {
    pub low: f64,
    pub high: f64,
}

impl Stretch {
    /// Cut points at the given percentiles (linear interpolation between
    /// order statistics).
    pub fn from_samples(samples: &[u16], low_pct: f64, high_pct: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Validation("cannot stretch an empty grid".into()));
        }
        if !(0.0..100.0).contains(&low_pct) || !(low_pct < high_pct && high_pct <= 100.0) {
            return Err(Error::Domain(format!(
                "stretch percentiles must satisfy 0 <= low < high <= 100, got {low_pct}/{high_pct}"
            )));
        }
        // Counting sort: samples are bounded, grids are large.
        let mut hist = vec![0usize; 1 << 16];
        for &s in samples {
            hist[s as usize] += 1;
        }
        let order_stat = |k: usize| -> f64 {
            let mut seen = 0;
            for (v, &c) in hist.iter().enumerate() {
                seen += c;
                if seen > k {
                    return v as f64;
                }
            }
            unreachable!("k < len")
        };
        let percentile = |p: f64| -> f64 {
            let rank = (samples.len() - 1) as f64 * p / 100.0;
            let lo = rank.floor() as usize;
            let frac = rank - lo as f64;
            let a = order_stat(lo);
            if frac == 0.0 {
                a
            } else {
                a + frac * (order_stat(lo + 1) - a)
            }
        };
        Ok(Stretch {
            low: percentile(low_pct),
            high: percentile(high_pct),
        })
    }

    #[inline]
    pub fn apply(&self, v: u16) -> u8 {
        let v = v as f64;
        if self.high <= self.low || v <= self.low {
            return 0;
        }
        if v >= self.high {
            return 255;
        }
        ((v - self.low) / (self.high - self.low) * 255.0).round() as u8
    }
}

/// Stretches a grid to 8 bits. A constant grid maps to all zeros.
pub fn stretch_to_8bit(samples: &[u16], low_pct: f64, high_pct: f64) -> Result<Vec<u8>> {
    let s = Stretch::from_samples(samples, low_pct, high_pct)?;
    Ok(samples.iter().map(|&v| s.apply(v)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_grid_is_zero() {
        assert_eq!(stretch_to_8bit(&[700; 16], 2.0, 98.0).unwrap(), vec![0; 16]);
    }

    #[test]
    fn two_valued_endpoints() {
        let out = stretch_to_8bit(&[100, 200, 100, 200], 0.0, 100.0).unwrap();
        assert_eq!(out, vec![0, 255, 0, 255]);
    }

    #[test]
    fn ramp_clips_endpoints_and_centres_midpoint() {
        let ramp: Vec<u16> = (0..1024).collect();
        let s = Stretch::from_samples(&ramp, 2.0, 98.0).unwrap();
        // Percentile oracle: rank 1023 * p, linear interpolation.
        assert!((s.low - 20.46).abs() < 1e-9 && (s.high - 1002.54).abs() < 1e-9);
        let out = stretch_to_8bit(&ramp, 2.0, 98.0).unwrap();
        assert_eq!(out[0], 0);
        assert_eq!(out[20], 0);
        assert_eq!(out[1023], 255);
        assert!(out[511] == 127 || out[511] == 128);
        assert!(out[512] == 127 || out[512] == 128);
    }

    #[test]
    fn bad_arguments() {
        assert!(stretch_to_8bit(&[], 2.0, 98.0).is_err());
        assert!(stretch_to_8bit(&[1, 2], 50.0, 50.0).is_err());
        assert!(stretch_to_8bit(&[1, 2], -1.0, 50.0).is_err());
    }

    proptest! {
        #[test]
        fn monotone_in_sample_value(
            grid in prop::collection::vec(any::<u16>(), 1..200),
            low in 0.0f64..50.0,
            span in 1.0f64..50.0,
        ) {
            let s = Stretch::from_samples(&grid, low, low + span).unwrap();
            let mut sorted = grid.clone();
            sorted.sort_unstable();
            for w in sorted.windows(2) {
                prop_assert!(s.apply(w[0]) <= s.apply(w[1]));
            }
        }
    }
}
