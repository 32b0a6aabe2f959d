//! The student objective: signed velocity operators, the weighted
//! negative-aware loss, and the weighted pull toward a frozen reference.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Bound, Mat, Tape, Var};
use crate::error::{Error, Result};
use crate::flowpath::{row_sq_error, FlowBatch, FlowField};

/// What the signed operators interpolate from: the current prediction
/// behind a stop-gradient, or the frozen EMA policy's velocity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    Live,
    #[default]
    Ema,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AfdConfig {
    /// Interpolation strength of the positive/negative operators.
    pub beta: f64,
    pub lambda_prior: f64,
    pub clip_max: f64,
    pub ema_decay: f64,
    pub anchor: Anchor,
}

impl Default for AfdConfig {
    fn default() -> Self {
        Self {
            beta: 0.1,
            lambda_prior: 1e-4,
            clip_max: 5.0,
            ema_decay: 0.99,
            anchor: Anchor::default(),
        }
    }
}

impl AfdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!("afd.beta must lie in (0, 1], got {}", self.beta)));
        }
        if !(self.lambda_prior >= 0.0) {
            return Err(Error::Config("afd.lambda_prior must be non-negative".into()));
        }
        if !(self.clip_max > 0.0) {
            return Err(Error::Config("afd.clip_max must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return Err(Error::Config("afd.ema_decay must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// `(1 − β)·sg(v) + β·v`
pub fn v_plus(tape: &mut Tape, v: Var, beta: f64) -> Result<Var> {
    let frozen = tape.stop_gradient(v)?;
    let a = tape.scale(frozen, 1.0 - beta)?;
    let b = tape.scale(v, beta)?;
    tape.add(a, b)
}

/// `(1 + β)·sg(v) − β·v`
pub fn v_minus(tape: &mut Tape, v: Var, beta: f64) -> Result<Var> {
    let frozen = tape.stop_gradient(v)?;
    let a = tape.scale(frozen, 1.0 + beta)?;
    let b = tape.scale(v, -beta)?;
    tape.add(a, b)
}

fn check_weights(weights: &[f64], rows: usize) -> Result<()> {
    if weights.len() != rows {
        return Err(Error::Input(format!("{} weights for {rows} states", weights.len())));
    }
    if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
        return Err(Error::Input(format!("weight {w} outside [0, 1]")));
    }
    Ok(())
}

fn col(weights: impl Iterator<Item = f64>, n: usize) -> Mat {
    Mat::from_shape_vec((n, 1), weights.collect()).expect("column")
}

/// `(1 − β)·v_old + β·v` and `(1 + β)·v_old − β·v` for a fixed `v_old`.
pub fn anchored_operators(tape: &mut Tape, v: Var, v_old: &Mat, beta: f64) -> Result<(Var, Var)> {
    if tape.shape(v) != v_old.dim() {
        return Err(Error::Input(format!("anchor shape {:?} vs {:?}", v_old.dim(), tape.shape(v))));
    }
    let old = tape.constant(v_old.clone())?;
    let a = tape.scale(old, 1.0 - beta)?;
    let b = tape.scale(v, beta)?;
    let plus = tape.add(a, b)?;
    let a = tape.scale(old, 1.0 + beta)?;
    let b = tape.scale(v, -beta)?;
    Ok((plus, tape.add(a, b)?))
}

/// `mean_i [ w_i‖v⁺ − v‖² + (1 − w_i)‖v⁻ − v‖² ]` for predictions `v_theta`
/// (n x d) against targets (n x d), with the operators built on `sg(v_theta)`.
pub fn nft_loss(tape: &mut Tape, v_theta: Var, target: &Mat, weights: &[f64], beta: f64) -> Result<Var> {
    nft_loss_from(tape, v_theta, None, target, weights, beta)
}

/// As [`nft_loss`], anchored at `v_old` when given.
pub fn nft_loss_from(
    tape: &mut Tape,
    v_theta: Var,
    v_old: Option<&Mat>,
    target: &Mat,
    weights: &[f64],
    beta: f64,
) -> Result<Var> {
    let n = tape.shape(v_theta).0;
    check_weights(weights, n)?;
    if n == 0 {
        return Err(Error::Input("nft_loss: empty batch".into()));
    }
    let target = tape.constant(target.clone())?;
    let (vp, vm) = match v_old {
        Some(old) => anchored_operators(tape, v_theta, old, beta)?,
        None => (v_plus(tape, v_theta, beta)?, v_minus(tape, v_theta, beta)?),
    };
    let ep = row_sq_error(tape, vp, target)?;
    let em = row_sq_error(tape, vm, target)?;
    let wp = tape.constant(col(weights.iter().copied(), n))?;
    let wm = tape.constant(col(weights.iter().map(|w| 1.0 - w), n))?;
    let a = tape.mul(ep, wp)?;
    let b = tape.mul(em, wm)?;
    let s = tape.add(a, b)?;
    tape.mean(s)
}

/// `mean_i w_i‖v_θ − v_ref‖²`
pub fn prior_loss(tape: &mut Tape, v_theta: Var, v_ref: &Mat, weights: &[f64]) -> Result<Var> {
    let n = tape.shape(v_theta).0;
    check_weights(weights, n)?;
    if n == 0 {
        return Err(Error::Input("prior_loss: empty batch".into()));
    }
    let r = tape.constant(v_ref.clone())?;
    let e = row_sq_error(tape, v_theta, r)?;
    let w = tape.constant(col(weights.iter().copied(), n))?;
    let we = tape.mul(e, w)?;
    tape.mean(we)
}

/// Loss nodes of one student objective evaluation.
#[derive(Debug, Clone, Copy)]
pub struct AfdLoss {
    pub total: Var,
    pub nft: Var,
    pub prior: Var,
}

/// `nft + λ_prior · prior` on a batch of noised states. `v_ref` holds the
/// frozen reference velocities on the same states; `v_old`, when given,
/// anchors the signed operators in place of `sg(v_θ)`.
#[allow(clippy::too_many_arguments)]
pub fn afd_loss<F: FlowField>(
    tape: &mut Tape,
    params: &Bound,
    field: &F,
    batch: &FlowBatch<F::Ctx>,
    v_ref: &Mat,
    v_old: Option<&Mat>,
    weights: &[f64],
    cfg: &AfdConfig,
) -> Result<AfdLoss> {
    let x_t = tape.constant(batch.x_t.clone())?;
    let v = field.velocity(tape, params, x_t, &batch.t, &batch.ctx)?;
    let nft = nft_loss_from(tape, v, v_old, &batch.target, weights, cfg.beta)?;
    let prior = prior_loss(tape, v, v_ref, weights)?;
    let scaled = tape.scale(prior, cfg.lambda_prior)?;
    let total = tape.add(nft, scaled)?;
    Ok(AfdLoss { total, nft, prior })
}
