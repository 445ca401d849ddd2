//! Small problems for exercising the optimizer end to end.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::training::loss::{bce_mask_grad, bce_mask_loss, MaskPair};
use crate::training::optimizer::{sgd_step, OptimizerState, SgdHyper};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ToyProblem {
    /// `J(p) = 0.5 |p|^2`.
    QuadraticBowl { start: Vec<f64> },
    /// Logistic per-pixel classifier `p_i = sigmoid(w0 * f_i + w1)` trained
    /// with the mask cross-entropy. Labels are `f_i > 0.5` for features drawn
    /// uniformly from `[0, 1)`.
    MaskLogit { pixels: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Loss before each step, then the final loss.
    pub losses: Vec<f64>,
    pub final_params: Vec<f64>,
}

impl Trajectory {
    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("trajectory has an initial loss")
    }
}

struct LogitData {
    features: Vec<f64>,
    labels: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl LogitData {
    fn new(pixels: usize, seed: u64) -> Result<Self> {
        if pixels == 0 {
            return Err(Error::Validation("mask-logit toy needs at least one pixel".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let features: Vec<f64> = (0..pixels).map(|_| rng.random::<f64>()).collect();
        let labels = features.iter().map(|&f| if f > 0.5 { 1.0 } else { 0.0 }).collect();
        Ok(LogitData { features, labels })
    }

    fn probs(&self, w: &[f64]) -> Vec<f64> {
        self.features.iter().map(|&f| sigmoid(w[0] * f + w[1])).collect()
    }

    fn loss_and_grad(&self, w: &[f64]) -> Result<(f64, Vec<f64>)> {
        let probs = self.probs(w);
        let pair = MaskPair::new(self.labels.clone(), probs.clone())?;
        let dp = bce_mask_grad(&pair);
        let mut g = vec![0.0; 2];
        for i in 0..probs.len() {
            let dz = dp[i] * probs[i] * (1.0 - probs[i]);
            g[0] += dz * self.features[i];
            g[1] += dz;
        }
        Ok((bce_mask_loss(&pair), g))
    }
}

/// Runs `steps` SGD updates. Fails with a numerical error naming the step
/// if the loss becomes non-finite or grows past `1e12` times its start.
pub fn fit_toy(problem: &ToyProblem, hyper: &SgdHyper, steps: usize) -> Result<Trajectory> {
    let logit = match problem {
        ToyProblem::MaskLogit { pixels, seed } => Some(LogitData::new(*pixels, *seed)?),
        ToyProblem::QuadraticBowl { start } if start.is_empty() => {
            return Err(Error::Validation("quadratic bowl needs a non-empty start point".into()))
        }
        ToyProblem::QuadraticBowl { .. } => None,
    };
    let start = match problem {
        ToyProblem::QuadraticBowl { start } => start.clone(),
        ToyProblem::MaskLogit { .. } => vec![0.0, 0.0],
    };
    let eval = |p: &[f64]| -> Result<(f64, Vec<f64>)> {
        match &logit {
            Some(d) => d.loss_and_grad(p),
            None => Ok((0.5 * p.iter().map(|x| x * x).sum::<f64>(), p.to_vec())),
        }
    };

    let mut state = OptimizerState::new(start);
    let (first, mut grad) = eval(&state.params)?;
    let ceiling = 1e12 * first.max(1.0);
    let mut losses = vec![first];
    for step in 1..=steps {
        state = sgd_step(&state, &grad, hyper)?;
        let (loss, g) = eval(&state.params)?;
        if !loss.is_finite() || loss > ceiling || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("toy fit diverged at step {step} (loss {loss:e})")));
        }
        losses.push(loss);
        grad = g;
    }
    Ok(Trajectory {
        losses,
        final_params: state.params,
    })
}
