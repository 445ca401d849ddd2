//! The numerical self-test suite behind `canopy-delta mathcheck`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::training::config::TrainConfig;
use crate::training::gradcheck::{check_bce, check_box_loss};
use crate::training::loss::BoxLossForm;
use crate::training::optimizer::{sgd_step, OptimizerState, SgdHyper};
use crate::training::toy::{fit_toy, ToyProblem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MathcheckReport {
    pub checks: Vec<CheckResult>,
}

impl MathcheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// One `PASS name: detail` / `FAIL ...` line per check.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            out.push_str(&format!("{tag} {}: {}\n", c.name, c.detail));
        }
        out
    }
}

fn check(name: &str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name: name.into(), passed, detail }
}

fn norm(p: &[f64]) -> f64 {
    p.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn run_mathcheck(seed: u64) -> Result<MathcheckReport> {
    let mut checks = Vec::new();

    for (name, form, s) in [
        ("box_loss_gradient", BoxLossForm::Squared, seed),
        ("box_loss_smooth_l1_gradient", BoxLossForm::SmoothL1, seed.wrapping_add(1)),
    ] {
        let g = check_box_loss(100, s, form)?;
        checks.push(check(
            name,
            g.max_rel_error < 1e-5,
            format!("{} instances, max rel err {:.3e} (< 1e-5)", g.instances, g.max_rel_error),
        ));
    }
    let g = check_bce(100, 32, seed.wrapping_add(2))?;
    checks.push(check(
        "bce_mask_gradient",
        g.max_rel_error < 1e-6,
        format!("{} instances of 32 px, max rel err {:.3e} (< 1e-6)", g.instances, g.max_rel_error),
    ));

    let cfg = TrainConfig::default();
    let s = sgd_step(&OptimizerState::new(vec![1.0]), &[2.0], &SgdHyper::from(&cfg))?;
    let (dv, dp) = ((s.velocity[0] + 0.020005).abs(), (s.params[0] - 0.979995).abs());
    checks.push(check(
        "sgd_reference_step",
        dv <= 1e-15 && dp <= 1e-15,
        format!("v = {:.17}, p = {:.17}", s.velocity[0], s.params[0]),
    ));

    let plain = SgdHyper { learning_rate: 0.1, momentum: 0.0, weight_decay: 0.0 };
    let params = vec![1.0, -0.3, 7.25, 1e-3];
    let grad = vec![0.5, 0.7, -3.0, 2.5e-4];
    let s = sgd_step(&OptimizerState::new(params.clone()), &grad, &plain)?;
    let exact = params
        .iter()
        .zip(&grad)
        .zip(&s.params)
        .all(|((p, g), q)| (p - 0.1 * g).to_bits() == q.to_bits());
    checks.push(check("sgd_plain_descent_bitwise", exact, "momentum = weight decay = 0".into()));

    let bowl = ToyProblem::QuadraticBowl { start: vec![1.0, 1.0] };
    let t = fit_toy(&bowl, &plain, 200)?;
    let n = norm(&t.final_params);
    checks.push(check("quadratic_bowl_200_steps", n < 1e-8, format!("|p| = {n:.3e} (< 1e-8)")));

    let heavy = SgdHyper { momentum: 0.938, ..plain };
    let t = fit_toy(&bowl, &heavy, 2000)?;
    let n = norm(&t.final_params);
    checks.push(check("quadratic_bowl_momentum", n < 1e-3, format!("|p| = {n:.3e} after 2000 steps (< 1e-3)")));

    let unstable = SgdHyper { learning_rate: 2.5, ..plain };
    let r = fit_toy(&bowl, &unstable, 1000);
    checks.push(check(
        "divergence_detected",
        r.is_err(),
        match r {
            Err(e) => e.to_string(),
            Ok(_) => "learning rate 2.5 did not diverge".into(),
        },
    ));

    let logit = ToyProblem::MaskLogit { pixels: 256, seed };
    let t = fit_toy(&logit, &SgdHyper { learning_rate: 0.5, momentum: 0.9, weight_decay: 0.0 }, 500)?;
    checks.push(check(
        "mask_logit_descends",
        t.final_loss() < 0.5 * t.losses[0],
        format!("loss {:.4} -> {:.4}", t.losses[0], t.final_loss()),
    ));

    let v = cfg.validate();
    checks.push(check(
        "train_config_reference",
        v.is_ok(),
        v.map(|_| "reference hyperparameters accepted".into()).unwrap_or_else(|e| e.to_string()),
    ));

    Ok(MathcheckReport { checks })
}
