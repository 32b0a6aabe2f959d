//! Central finite-difference verification of backward-pass gradients.

use ndarray::Array2;

use super::params::ParamStore;
use super::tape::{Bound, Mat, Tape, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub coords_checked: usize,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tol
    }
}

/// Gradient of `loss_fn` at `params` via one tape and a backward pass.
pub fn analytic_grad<F>(loss_fn: &F, params: &ParamStore) -> Result<(f64, Vec<Mat>)>
where
    F: Fn(&mut Tape, &Bound) -> Result<Var>,
{
    let mut tape = Tape::new();
    let bound = tape.bind(params)?;
    let loss = loss_fn(&mut tape, &bound)?;
    let grads = tape.backward(loss)?;
    Ok((tape.scalar(loss), bound.collect(&grads)))
}

/// Central differences of a scalar function of the parameters. When
/// `per_param` is set only that many evenly spaced coordinates of each array
/// are perturbed; the rest are reported as `NaN` and skipped by [`compare`].
pub fn finite_difference<F>(
    f: F,
    params: &ParamStore,
    step: f64,
    per_param: Option<usize>,
) -> Result<Vec<Mat>>
where
    F: Fn(&ParamStore) -> Result<f64>,
{
    let mut work = params.clone();
    let mut out = Vec::with_capacity(params.len());
    for (i, (name, value)) in params.iter().enumerate() {
        let id = params.id(name).expect("own name");
        let n = value.len();
        let mut g = Array2::from_elem(value.dim(), f64::NAN);
        let picks: Vec<usize> = match per_param {
            Some(k) if k < n => (0..k).map(|j| j * n / k).collect(),
            _ => (0..n).collect(),
        };
        for flat in picks {
            let (r, c) = (flat / value.ncols(), flat % value.ncols());
            let orig = value[[r, c]];
            work.view_mut(id)[[r, c]] = orig + step;
            let up = f(&work)?;
            work.view_mut(id)[[r, c]] = orig - step;
            let down = f(&work)?;
            work.view_mut(id)[[r, c]] = orig;
            if !up.is_finite() || !down.is_finite() {
                return Err(Error::numerical("grad_check", format!("non-finite loss at `{name}`")));
            }
            g[[r, c]] = (up - down) / (2.0 * step);
        }
        debug_assert_eq!(out.len(), i);
        out.push(g);
    }
    Ok(out)
}

/// Relative error per coordinate, `|a - n| / max(|a|, |n|, floor)` with
/// `floor = 1e-6 * max(1, max |a|)`.
pub fn compare(params: &ParamStore, analytic: &[Mat], numeric: &[Mat], tol: f64) -> GradCheckReport {
    let scale = analytic
        .iter()
        .flat_map(|g| g.iter())
        .fold(1.0f64, |m, x| m.max(x.abs()));
    let floor = 1e-6 * scale;
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        coords_checked: 0,
        worst: None,
        tol,
    };
    for (((name, _), a), n) in params.iter().zip(analytic).zip(numeric) {
        for (flat, (&a, &n)) in a.iter().zip(n.iter()).enumerate() {
            if n.is_nan() {
                continue;
            }
            report.coords_checked += 1;
            let abs = (a - n).abs();
            let rel = abs / a.abs().max(n.abs()).max(floor);
            report.max_abs_error = report.max_abs_error.max(abs);
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((name.to_string(), flat));
            }
        }
    }
    report
}

/// Compare backward-pass gradients of `loss_fn` against central differences.
pub fn grad_check<F>(loss_fn: F, params: &ParamStore, step: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &Bound) -> Result<Var>,
{
    grad_check_sampled(loss_fn, params, step, tol, None)
}

pub fn grad_check_sampled<F>(
    loss_fn: F,
    params: &ParamStore,
    step: f64,
    tol: f64,
    per_param: Option<usize>,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &Bound) -> Result<Var>,
{
    if !(step > 0.0) || !(tol > 0.0) {
        return Err(Error::Config(format!("grad_check: step {step} and tol {tol} must be positive")));
    }
    let (value, analytic) = analytic_grad(&loss_fn, params)?;
    if !value.is_finite() {
        return Err(Error::numerical("grad_check", "non-finite loss"));
    }
    let numeric = finite_difference(
        |p| {
            let mut tape = Tape::new();
            let bound = tape.bind(p)?;
            let loss = loss_fn(&mut tape, &bound)?;
            Ok(tape.scalar(loss))
        },
        params,
        step,
        per_param,
    )?;
    Ok(compare(params, &analytic, &numeric, tol))
}
