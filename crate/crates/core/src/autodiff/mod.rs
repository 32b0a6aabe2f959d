//! Minimal reverse-mode differentiation for small multilayer perceptrons.

pub mod gradcheck;
pub mod optim;
pub mod params;
pub mod tape;

pub use gradcheck::{analytic_grad, compare, finite_difference, grad_check, grad_check_sampled, GradCheckReport};
pub use optim::{ema_update, global_norm, AdamW};
pub use params::{glorot, ParamId, ParamStore};
pub use tape::{log_logistic, logistic, Bound, Gradients, Mat, Tape, Var};
