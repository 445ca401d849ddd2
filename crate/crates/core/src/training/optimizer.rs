use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::training::config::TrainConfig;

/// Learning rate, momentum and weight decay for one SGD step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdHyper {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl From<&TrainConfig> for SgdHyper {
    fn from(c: &TrainConfig) -> Self {
        SgdHyper {
            learning_rate: c.learning_rate,
            momentum: c.momentum,
            weight_decay: c.weight_decay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub params: Vec<f64>,
    pub velocity: Vec<f64>,
    pub step: u64,
}

impl OptimizerState {
    /// Zero velocity at step 0.
    pub fn new(params: Vec<f64>) -> Self {
        let velocity = vec![0.0; params.len()];
        OptimizerState {
            params,
            velocity,
            step: 0,
        }
    }
}

/// One momentum step with decoupled-into-velocity weight decay:
///
/// ```text
/// v' = mu * v - lr * g - wd * lr * p
/// p' = p + v'
/// ```
///
/// The gradient is evaluated at the current parameters.
pub fn sgd_step(state: &OptimizerState, grad: &[f64], hyper: &SgdHyper) -> Result<OptimizerState> {
    let n = state.params.len();
    if grad.len() != n || state.velocity.len() != n {
        return Err(Error::Validation(format!(
            "sgd step shape mismatch: {n} params, {} velocity, {} gradient",
            state.velocity.len(),
            grad.len()
        )));
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite gradient at index {i} (step {}); step refused",
            state.step
        )));
    }
    let SgdHyper {
        learning_rate: lr,
        momentum: mu,
        weight_decay: wd,
    } = *hyper;
    let mut params = Vec::with_capacity(n);
    let mut velocity = Vec::with_capacity(n);
    for i in 0..n {
        let p = state.params[i];
        let v = mu * state.velocity[i] - lr * grad[i] - wd * lr * p;
        velocity.push(v);
        params.push(p + v);
    }
    Ok(OptimizerState {
        params,
        velocity,
        step: state.step + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_gradient_descent_case() {
        let h = SgdHyper { learning_rate: 0.1, momentum: 0.0, weight_decay: 0.0 };
        let s = sgd_step(&OptimizerState::new(vec![1.0]), &[0.5], &h).unwrap();
        assert_eq!(s.velocity, vec![-0.05]);
        assert_eq!(s.params, vec![0.95]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn table_hyperparameters_example() {
        let h = SgdHyper { learning_rate: 0.01, momentum: 0.938, weight_decay: 0.0005 };
        let s = sgd_step(&OptimizerState::new(vec![1.0]), &[2.0], &h).unwrap();
        assert!((s.velocity[0] + 0.020005).abs() < 1e-15);
        assert!((s.params[0] - 0.979995).abs() < 1e-15);
    }

    #[test]
    fn pure_momentum_decays() {
        let h = SgdHyper { learning_rate: 0.1, momentum: 0.9, weight_decay: 0.0 };
        let mut s = OptimizerState { params: vec![0.0, 0.0], velocity: vec![1.0, -2.0], step: 0 };
        let mut prev = 5f64.sqrt();
        for _ in 0..200 {
            s = sgd_step(&s, &[0.0, 0.0], &h).unwrap();
            let norm = s.velocity.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm < prev);
            prev = norm;
        }
        assert!(prev < 1e-8);
    }

    #[test]
    fn refuses_non_finite_gradient() {
        let h = SgdHyper { learning_rate: 0.1, momentum: 0.0, weight_decay: 0.0 };
        let err = sgd_step(&OptimizerState::new(vec![1.0, 1.0]), &[0.0, f64::INFINITY], &h).unwrap_err();
        assert!(err.to_string().contains("index 1"));
        assert!(sgd_step(&OptimizerState::new(vec![1.0]), &[0.0, 1.0], &h).is_err());
    }
}
