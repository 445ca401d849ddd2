use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_RATIOS: (f64, f64, f64) = (0.7, 0.2, 0.1);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
    pub seed: u64,
}

impl DatasetSplit {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }
}

/// Part sizes: floor of each share, then the leftover handed out one at a
/// time in the order train, val, test.
pub fn split_sizes(n: usize, ratios: (f64, f64, f64)) -> (usize, usize, usize) {
    let shares = [ratios.0, ratios.1, ratios.2];
    let mut sizes = shares.map(|r| (n as f64 * r + 1e-9).floor() as usize);
    let mut left = n - sizes.iter().sum::<usize>().min(n);
    let mut k = 0;
    while left > 0 {
        sizes[k % 3] += 1;
        left -= 1;
        k += 1;
    }
    (sizes[0], sizes[1], sizes[2])
}

/// Seeded shuffle of the sorted ids followed by a contiguous partition.
/// The result depends only on the id set, the ratios and the seed.
pub fn split_dataset(ids: &[String], ratios: (f64, f64, f64), seed: u64) -> Result<DatasetSplit> {
    if ids.is_empty() {
        return Err(Error::Validation("cannot split an empty id list".into()));
    }
    let r = [ratios.0, ratios.1, ratios.2];
    if r.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Validation(format!("split ratios must be non-negative, got {ratios:?}")));
    }
    let sum: f64 = r.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(format!("split ratios sum to {sum}, expected 1")));
    }
    let unique: BTreeSet<&String> = ids.iter().collect();
    if unique.len() != ids.len() {
        return Err(Error::Validation("duplicate image ids in split input".into()));
    }
    let mut order: Vec<String> = unique.into_iter().cloned().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let (n_train, n_val, _) = split_sizes(order.len(), ratios);
    let test = order.split_off(n_train + n_val);
    let val = order.split_off(n_train);
    Ok(DatasetSplit {
        train: order,
        val,
        test,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("18/{i}/0")).collect()
    }

    #[test]
    fn ten_ids_exact() {
        let s = split_dataset(&ids(10), DEFAULT_RATIOS, 0).unwrap();
        assert_eq!(s.sizes(), (7, 2, 1));
    }

    #[test]
    fn nine_ids_follow_the_allocation_rule() {
        // floors (6, 1, 0), two left over -> train, then val.
        assert_eq!(split_sizes(9, DEFAULT_RATIOS), (7, 2, 0));
        let s = split_dataset(&ids(9), DEFAULT_RATIOS, 3).unwrap();
        assert_eq!(s.sizes(), (7, 2, 0));
    }

    #[test]
    fn deterministic_and_input_order_free() {
        let a = split_dataset(&ids(40), DEFAULT_RATIOS, 11).unwrap();
        let b = split_dataset(&ids(40), DEFAULT_RATIOS, 11).unwrap();
        assert_eq!(a, b);
        let mut rev = ids(40);
        rev.reverse();
        assert_eq!(split_dataset(&rev, DEFAULT_RATIOS, 11).unwrap(), a);
        assert_ne!(split_dataset(&ids(40), DEFAULT_RATIOS, 12).unwrap(), a);
    }

    #[test]
    fn errors() {
        assert!(split_dataset(&[], DEFAULT_RATIOS, 0).is_err());
        assert!(split_dataset(&ids(5), (0.5, 0.2, 0.2), 0).is_err());
        let dup = vec!["a".to_string(), "a".to_string()];
        assert!(split_dataset(&dup, DEFAULT_RATIOS, 0).is_err());
    }
}
