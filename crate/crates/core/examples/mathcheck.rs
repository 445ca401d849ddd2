//! Gradient checks, one SGD step worked by hand, and a toy convergence run.
//!
//!     cargo run --example mathcheck

use canopy_delta::training::{fit_toy, run_mathcheck, sgd_step, OptimizerState, SgdHyper, ToyProblem};

fn main() -> canopy_delta::Result<()> {
    for c in run_mathcheck(0)?.checks {
        println!("{:<32} {}  {}", c.name, if c.passed { "ok  " } else { "FAIL" }, c.detail);
    }

    let hyper = SgdHyper { learning_rate: 0.01, momentum: 0.938, weight_decay: 0.0005 };
    let s = sgd_step(&OptimizerState::new(vec![1.0]), &[2.0], &hyper)?;
    println!("one step from p=1, g=2: v = {}, p = {}", s.velocity[0], s.params[0]);

    let plain = SgdHyper { learning_rate: 0.1, momentum: 0.0, weight_decay: 0.0 };
    let t = fit_toy(&ToyProblem::MaskLogit { pixels: 256, seed: 1 }, &SgdHyper { momentum: 0.9, ..plain }, 300)?;
    println!(
        "mask logit: loss {:.4} -> {:.4} after 300 steps",
        t.losses[0],
        t.losses.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}
