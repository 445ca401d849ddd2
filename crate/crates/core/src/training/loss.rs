//! Bounding-box regression loss over an S x S grid with B anchors per cell,
//! and pixel-wise binary cross-entropy for masks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability clamp for the cross-entropy.
pub const BCE_EPS: f64 = 1e-7;

/// Per-coordinate penalty applied to `t - b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxLossForm {
    /// `(t - b)^2`, the weighted sum-of-squares form.
    #[default]
    Squared,
    /// Huber with unit threshold: `0.5 d^2` for `|d| < 1`, else `|d| - 0.5`.
    SmoothL1,
}

impl BoxLossForm {
    fn value(self, d: f64) -> f64 {
        match self {
            BoxLossForm::Squared => d * d,
            BoxLossForm::SmoothL1 => {
                if d.abs() < 1.0 {
                    0.5 * d * d
                } else {
                    d.abs() - 0.5
                }
            }
        }
    }

    fn derivative(self, d: f64) -> f64 {
        match self {
            BoxLossForm::Squared => 2.0 * d,
            BoxLossForm::SmoothL1 => {
                if d.abs() < 1.0 {
                    d
                } else {
                    d.signum()
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxCoefficients {
    pub coord: f64,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Default for BoxCoefficients {
    fn default() -> Self {
        BoxCoefficients {
            coord: 1.0,
            x: 1.0,
            y: 1.0,
            w: 1.0,
            h: 1.0,
        }
    }
}

impl BoxCoefficients {
    fn per_term(&self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }
}

/// Grid layout and responsibility indicators. Slot `cell * anchors + anchor`
/// holds the indicator for that (cell, anchor) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxLossParams {
    pub grid_size: usize,
    pub anchors_per_cell: usize,
    pub responsible: Vec<bool>,
    pub coefficients: BoxCoefficients,
    pub form: BoxLossForm,
}

impl BoxLossParams {
    pub fn slots(&self) -> usize {
        self.grid_size * self.grid_size * self.anchors_per_cell
    }

    fn check(&self, pred: &[[f64; 4]], target: &[[f64; 4]]) -> Result<()> {
        if self.grid_size == 0 || self.anchors_per_cell == 0 {
            return Err(Error::Validation("grid size and anchors per cell must be >= 1".into()));
        }
        let n = self.slots();
        if self.responsible.len() != n || pred.len() != n || target.len() != n {
            return Err(Error::Validation(format!(
                "box loss shape mismatch: expected {n} slots, got indicators {}, predictions {}, targets {}",
                self.responsible.len(),
                pred.len(),
                target.len()
            )));
        }
        let c = &self.coefficients;
        if [c.coord, c.x, c.y, c.w, c.h].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Validation("box loss coefficients must be finite and non-negative".into()));
        }
        if pred.iter().chain(target).flatten().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite box coordinate".into()));
        }
        Ok(())
    }
}

/// `coord * sum_slots obj * (x*f(tx-bx) + y*f(ty-by) + w*f(tw-bw) + h*f(th-bh))`.
pub fn box_loss(params: &BoxLossParams, pred: &[[f64; 4]], target: &[[f64; 4]]) -> Result<f64> {
    params.check(pred, target)?;
    let k = params.coefficients.per_term();
    let mut sum = 0.0;
    for ((&obj, t), b) in params.responsible.iter().zip(pred).zip(target) {
        if !obj {
            continue;
        }
        let mut slot = 0.0;
        for c in 0..4 {
            slot += k[c] * params.form.value(t[c] - b[c]);
        }
        sum += slot;
    }
    Ok(params.coefficients.coord * sum)
}

/// Gradient of [`box_loss`] with respect to every predicted coordinate.
pub fn box_loss_grad(params: &BoxLossParams, pred: &[[f64; 4]], target: &[[f64; 4]]) -> Result<Vec<[f64; 4]>> {
    params.check(pred, target)?;
    let k = params.coefficients.per_term();
    let coord = params.coefficients.coord;
    Ok(params
        .responsible
        .iter()
        .zip(pred)
        .zip(target)
        .map(|((&obj, t), b)| {
            if !obj {
                return [0.0; 4];
            }
            std::array::from_fn(|c| coord * k[c] * params.form.derivative(t[c] - b[c]))
        })
        .collect())
}

/// Ground-truth labels and predicted probabilities for one mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskPair {
    truth: Vec<f64>,
    prob: Vec<f64>,
}

impl MaskPair {
    pub fn new(truth: Vec<f64>, prob: Vec<f64>) -> Result<Self> {
        if truth.len() != prob.len() {
            return Err(Error::Validation(format!(
                "mask pair lengths differ: {} labels vs {} probabilities",
                truth.len(),
                prob.len()
            )));
        }
        if truth.is_empty() {
            return Err(Error::Validation("mask pair has no pixels".into()));
        }
        if truth.iter().any(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::Validation("mask labels must be 0 or 1".into()));
        }
        if prob.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numerical("non-finite mask probability".into()));
        }
        Ok(MaskPair { truth, prob })
    }

    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }

    pub fn truth(&self) -> &[f64] {
        &self.truth
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.prob
    }

    fn clamped(&self, i: usize) -> f64 {
        self.prob[i].clamp(BCE_EPS, 1.0 - BCE_EPS)
    }
}

/// `-(1/N) sum (y ln p + (1 - y) ln(1 - p))` with `p` clamped to `[eps, 1 - eps]`.
pub fn bce_mask_loss(pair: &MaskPair) -> f64 {
    let n = pair.len() as f64;
    let sum: f64 = (0..pair.len())
        .map(|i| {
            let (y, p) = (pair.truth[i], pair.clamped(i));
            y * p.ln() + (1.0 - y) * (1.0 - p).ln()
        })
        .sum();
    -sum / n
}

/// `dL/dp_i = -(1/N) (y_i / p_i - (1 - y_i) / (1 - p_i))`, evaluated at the
/// clamped probability.
pub fn bce_mask_grad(pair: &MaskPair) -> Vec<f64> {
    let n = pair.len() as f64;
    (0..pair.len())
        .map(|i| {
            let (y, p) = (pair.truth[i], pair.clamped(i));
            -(y / p - (1.0 - y) / (1.0 - p)) / n
        })
        .collect()
}
