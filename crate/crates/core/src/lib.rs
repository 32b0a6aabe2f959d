//! Adversarial flow distillation at desk scale.

pub mod autodiff;
pub mod baselines;
pub mod config;
pub mod discriminator;
pub mod error;
pub mod eval;
pub mod flowpath;
pub mod nn;
pub mod objective;
pub mod rng;
pub mod run;
pub mod svg;
pub mod student;
pub mod teacher;
pub mod trainer;

pub use error::{Error, Result};
