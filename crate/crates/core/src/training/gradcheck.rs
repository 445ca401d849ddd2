//! Central finite-difference gradient checking.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::training::loss::{
    bce_mask_grad, bce_mask_loss, box_loss, box_loss_grad, BoxCoefficients, BoxLossForm, BoxLossParams,
    MaskPair,
};

pub const FD_STEP: f64 = 1e-5;

/// `|a - b| / max(1, |a|, |b|)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

/// Largest relative error between `analytic` and central differences of `f`
/// around `x`.
pub fn max_fd_error(x: &[f64], analytic: &[f64], mut f: impl FnMut(&[f64]) -> Result<f64>) -> Result<f64> {
    let mut probe = x.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        probe[i] = x[i] + FD_STEP;
        let up = f(&probe)?;
        probe[i] = x[i] - FD_STEP;
        let down = f(&probe)?;
        probe[i] = x[i];
        worst = worst.max(relative_error(analytic[i], (up - down) / (2.0 * FD_STEP)));
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheck {
    pub instances: usize,
    pub max_rel_error: f64,
}

/// Random box-loss problem: grid 1..=4, anchors 1..=3, random indicators,
/// coefficients and coordinates.
pub fn random_box_problem(rng: &mut impl Rng, form: BoxLossForm) -> (BoxLossParams, Vec<[f64; 4]>, Vec<[f64; 4]>) {
    let grid_size = rng.random_range(1..=4);
    let anchors_per_cell = rng.random_range(1..=3);
    let n = grid_size * grid_size * anchors_per_cell;
    let mut coef = || rng.random_range(0.1..5.0);
    let coefficients = BoxCoefficients { coord: coef(), x: coef(), y: coef(), w: coef(), h: coef() };
    let responsible = (0..n).map(|_| rng.random_bool(0.6)).collect();
    let mut boxes = || (0..n).map(|_| std::array::from_fn(|_| rng.random_range(-2.0..2.0))).collect::<Vec<_>>();
    let pred = boxes();
    let target = boxes();
    (BoxLossParams { grid_size, anchors_per_cell, responsible, coefficients, form }, pred, target)
}

fn flatten(b: &[[f64; 4]]) -> Vec<f64> {
    b.iter().flatten().copied().collect()
}

fn unflatten(x: &[f64]) -> Vec<[f64; 4]> {
    x.chunks_exact(4).map(|c| [c[0], c[1], c[2], c[3]]).collect()
}

pub fn check_box_loss(instances: usize, seed: u64, form: BoxLossForm) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (params, pred, target) = random_box_problem(&mut rng, form);
        let grad = flatten(&box_loss_grad(&params, &pred, &target)?);
        let e = max_fd_error(&flatten(&pred), &grad, |x| box_loss(&params, &unflatten(x), &target))?;
        worst = worst.max(e);
    }
    Ok(GradCheck { instances, max_rel_error: worst })
}

/// Probabilities are drawn from `[0.05, 0.95]` so the finite-difference
/// stencil stays clear of the clamp.
pub fn check_bce(instances: usize, pixels: usize, seed: u64) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let truth: Vec<f64> = (0..pixels).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
        let prob: Vec<f64> = (0..pixels).map(|_| rng.random_range(0.05..0.95)).collect();
        let grad = bce_mask_grad(&MaskPair::new(truth.clone(), prob.clone())?);
        let e = max_fd_error(&prob, &grad, |x| Ok(bce_mask_loss(&MaskPair::new(truth.clone(), x.to_vec())?)))?;
        worst = worst.max(e);
    }
    Ok(GradCheck { instances, max_rel_error: worst })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(1e-9, 0.0), 1e-9);
        assert_eq!(relative_error(200.0, 100.0), 0.5);
    }

    #[test]
    fn gradients_agree() {
        assert!(check_box_loss(20, 1, BoxLossForm::Squared).unwrap().max_rel_error < 1e-5);
        assert!(check_box_loss(20, 2, BoxLossForm::SmoothL1).unwrap().max_rel_error < 1e-5);
        assert!(check_bce(20, 32, 3).unwrap().max_rel_error < 1e-6);
    }
}
