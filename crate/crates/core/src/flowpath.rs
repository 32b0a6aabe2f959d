//! Forward noising path, flow-matching targets and few-step Euler sampling.

use std::f64::consts::FRAC_PI_2;

use ndarray::{Array1, Axis};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Bound, Mat, Tape, Var};
use crate::error::{Error, Result};
use crate::rng::{normal_matrix, Rng};

/// Interpolation schedule `x_t = α(t) x0 + σ(t) ε` on `t ∈ [0, 1]`, clean at
/// `t = 0` and pure noise at `t = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// α = 1 − t, σ = t.
    #[default]
    RectifiedFlow,
    /// α = cos(πt/2), σ = sin(πt/2).
    Trigonometric,
}

impl Schedule {
    pub const ALL: [Schedule; 2] = [Schedule::RectifiedFlow, Schedule::Trigonometric];

    pub fn name(self) -> &'static str {
        match self {
            Schedule::RectifiedFlow => "rectified_flow",
            Schedule::Trigonometric => "trigonometric",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown schedule `{name}`")))
    }

    pub fn alpha(self, t: f64) -> f64 {
        match self {
            Schedule::RectifiedFlow => 1.0 - t,
            Schedule::Trigonometric => (FRAC_PI_2 * t).cos(),
        }
    }

    pub fn sigma(self, t: f64) -> f64 {
        match self {
            Schedule::RectifiedFlow => t,
            Schedule::Trigonometric => (FRAC_PI_2 * t).sin(),
        }
    }

    pub fn alpha_dot(self, t: f64) -> f64 {
        match self {
            Schedule::RectifiedFlow => -1.0,
            Schedule::Trigonometric => -FRAC_PI_2 * (FRAC_PI_2 * t).sin(),
        }
    }

    pub fn sigma_dot(self, t: f64) -> f64 {
        match self {
            Schedule::RectifiedFlow => 1.0,
            Schedule::Trigonometric => FRAC_PI_2 * (FRAC_PI_2 * t).cos(),
        }
    }
}

fn check_t(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Input(format!("time {t} outside [0, 1]")));
    }
    Ok(())
}

/// A forward-noised clean block with everything needed to rebuild its target.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisySample {
    pub x0: Array1<f64>,
    pub eps: Array1<f64>,
    pub t: f64,
    pub x_t: Array1<f64>,
    pub v: Array1<f64>,
}

pub fn forward_noise(x0: &Array1<f64>, t: f64, eps: &Array1<f64>, sched: Schedule) -> Result<NoisySample> {
    check_t(t)?;
    if x0.len() != eps.len() {
        return Err(Error::Input(format!(
            "clean block has dimension {} but noise has {}",
            x0.len(),
            eps.len()
        )));
    }
    let (a, s) = (sched.alpha(t), sched.sigma(t));
    let (ad, sd) = (sched.alpha_dot(t), sched.sigma_dot(t));
    Ok(NoisySample {
        x0: x0.clone(),
        eps: eps.clone(),
        t,
        x_t: x0 * a + eps * s,
        v: x0 * ad + eps * sd,
    })
}

/// Row-wise forward noising: returns `(x_t, v)` for per-row times `t`.
pub fn forward_noise_rows(x0: &Mat, t: &[f64], eps: &Mat, sched: Schedule) -> Result<(Mat, Mat)> {
    if x0.dim() != eps.dim() || x0.nrows() != t.len() {
        return Err(Error::Input(format!(
            "forward_noise_rows: x0 {:?}, eps {:?}, {} times",
            x0.dim(),
            eps.dim(),
            t.len()
        )));
    }
    let mut x_t = Mat::zeros(x0.dim());
    let mut v = Mat::zeros(x0.dim());
    for (i, &ti) in t.iter().enumerate() {
        check_t(ti)?;
        let (a, s) = (sched.alpha(ti), sched.sigma(ti));
        let (ad, sd) = (sched.alpha_dot(ti), sched.sigma_dot(ti));
        let (x0r, er) = (x0.row(i), eps.row(i));
        x_t.row_mut(i).assign(&(&x0r * a + &er * s));
        v.row_mut(i).assign(&(&x0r * ad + &er * sd));
    }
    Ok((x_t, v))
}

/// A velocity field usable by the flow-matching losses: evaluated on a tape
/// for a batch of rows with per-row times and model-specific context.
pub trait FlowField {
    type Ctx;

    fn velocity(&self, tape: &mut Tape, params: &Bound, x_t: Var, t: &[f64], ctx: &Self::Ctx) -> Result<Var>;
}

/// A batch of noised states with their conditioning context.
#[derive(Debug, Clone)]
pub struct FlowBatch<C> {
    pub x0: Mat,
    pub eps: Mat,
    pub t: Vec<f64>,
    pub x_t: Mat,
    pub target: Mat,
    pub ctx: C,
}

impl<C> FlowBatch<C> {
    pub fn new(x0: Mat, t: Vec<f64>, eps: Mat, sched: Schedule, ctx: C) -> Result<Self> {
        let (x_t, target) = forward_noise_rows(&x0, &t, &eps, sched)?;
        Ok(Self {
            x0,
            eps,
            t,
            x_t,
            target,
            ctx,
        })
    }

    /// Draw one `t ~ U[0,1]` and `ε ~ N(0, I)` per row.
    pub fn sample(x0: Mat, sched: Schedule, ctx: C, rng: &mut Rng) -> Result<Self> {
        use rand::Rng as _;
        let t: Vec<f64> = (0..x0.nrows()).map(|_| rng.random::<f64>()).collect();
        let eps = normal_matrix(x0.nrows(), x0.ncols(), rng);
        Self::new(x0, t, eps, sched, ctx)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Per-row squared error `‖pred − target‖²` as an n x 1 node.
pub fn row_sq_error(tape: &mut Tape, pred: Var, target: Var) -> Result<Var> {
    let d = tape.sub(pred, target)?;
    let sq = tape.square(d)?;
    tape.sum_rows(sq)
}

/// Mean over rows of `‖v_θ(x_t, t, ·) − v‖²`.
pub fn fm_loss<F: FlowField>(tape: &mut Tape, params: &Bound, field: &F, batch: &FlowBatch<F::Ctx>) -> Result<Var> {
    if batch.is_empty() {
        return Err(Error::Input("fm_loss: empty batch".into()));
    }
    let x_t = tape.constant(batch.x_t.clone())?;
    let target = tape.constant(batch.target.clone())?;
    let pred = field.velocity(tape, params, x_t, &batch.t, &batch.ctx)?;
    let per_row = row_sq_error(tape, pred, target)?;
    tape.mean(per_row)
}

/// Euler integration of `dx/dt = v(x, t)` from `t = 1` down to `t = 0` in
/// `steps` uniform steps, starting at `x1`.
pub fn euler_integrate<F>(mut field: F, x1: Mat, steps: usize) -> Result<Mat>
where
    F: FnMut(&Mat, f64) -> Result<Mat>,
{
    if steps == 0 {
        return Err(Error::Input("sampler needs at least one step".into()));
    }
    let h = 1.0 / steps as f64;
    let mut x = x1;
    for i in 0..steps {
        let t = 1.0 - i as f64 * h;
        let v = field(&x, t).map_err(|e| match e {
            Error::Numerical { op, detail } => {
                Error::numerical(format!("sample_ode step {i}"), format!("{op}: {detail}"))
            }
            other => other,
        })?;
        x.scaled_add(-h, &v);
        if x.iter().any(|z| !z.is_finite()) {
            return Err(Error::numerical(format!("sample_ode step {i}"), format!("non-finite state at t={t}")));
        }
    }
    Ok(x)
}

/// Draw `x1 ~ N(0, I)` of shape `rows x dim` and integrate to `t = 0`.
pub fn sample_ode<F>(field: F, rows: usize, dim: usize, steps: usize, rng: &mut Rng) -> Result<Mat>
where
    F: FnMut(&Mat, f64) -> Result<Mat>,
{
    let x1 = normal_matrix(rows, dim, rng);
    euler_integrate(field, x1, steps)
}

/// Column means of a sample matrix.
pub fn sample_mean(x: &Mat) -> Array1<f64> {
    x.mean_axis(Axis(0)).expect("nonempty sample")
}
