//! Loss functions, SGD, training configuration and their numerical checks.

pub mod config;
pub mod gradcheck;
pub mod loss;
pub mod mathcheck;
pub mod optimizer;
pub mod toy;

pub use config::TrainConfig;
pub use gradcheck::{check_bce, check_box_loss, relative_error, GradCheck};
pub use loss::{
    bce_mask_grad, bce_mask_loss, box_loss, box_loss_grad, BoxCoefficients, BoxLossForm, BoxLossParams, MaskPair,
    BCE_EPS,
};
pub use mathcheck::{run_mathcheck, CheckResult, MathcheckReport};
pub use optimizer::{sgd_step, OptimizerState, SgdHyper};
pub use toy::{fit_toy, ToyProblem, Trajectory};
