use ndarray::Array2;

use super::params::ParamStore;
use crate::error::{Error, Result};

/// Decoupled-weight-decay Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub max_grad_norm: Option<f64>,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    t: u64,
}

impl AdamW {
    /// Optimizer with the run defaults: betas (0.9, 0.999), eps 1e-8,
    /// weight decay 1e-4 and a global norm clip of 1.0.
    pub fn new(lr: f64, params: &ParamStore) -> Self {
        let zeros: Vec<_> = params.iter().map(|(_, v)| Array2::zeros(v.dim())).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-4,
            max_grad_norm: Some(1.0),
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// Apply one update. Returns the gradient norm before clipping.
    pub fn step(&mut self, params: &mut ParamStore, grads: &[Array2<f64>]) -> Result<f64> {
        if grads.len() != params.len() {
            return Err(Error::Config(format!(
                "optimizer: {} gradients for {} parameters",
                grads.len(),
                params.len()
            )));
        }
        let norm = global_norm(grads);
        if !norm.is_finite() {
            let bad = params
                .names()
                .iter()
                .zip(grads)
                .find(|(_, g)| g.iter().any(|x| !x.is_finite()))
                .map(|(n, _)| n.as_str())
                .unwrap_or("?");
            return Err(Error::numerical(
                "optimizer",
                format!("non-finite gradient norm (first offending parameter `{bad}`)"),
            ));
        }
        let scale = match self.max_grad_norm {
            Some(max) if norm > max => max / norm,
            _ => 1.0,
        };
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let (b1, b2, eps, lr, wd) = (self.beta1, self.beta2, self.eps, self.lr, self.weight_decay);
        for (i, (_, mut p)) in params.iter_mut().enumerate() {
            let g = &grads[i];
            if g.dim() != p.dim() {
                return Err(Error::Config(format!(
                    "optimizer: gradient shape {:?} != parameter shape {:?}",
                    g.dim(),
                    p.dim()
                )));
            }
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            ndarray::Zip::from(&mut p)
                .and(g)
                .and(m)
                .and(v)
                .for_each(|p, &g, m, v| {
                    let g = g * scale;
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    let mhat = *m / bc1;
                    let vhat = *v / bc2;
                    *p -= lr * (mhat / (vhat.sqrt() + eps) + wd * *p);
                });
        }
        Ok(norm)
    }

    /// Moments as parameter stores (for checkpointing).
    pub fn export(&self, layout: &ParamStore) -> Result<(ParamStore, ParamStore, u64)> {
        let mut m = ParamStore::new();
        let mut v = ParamStore::new();
        for (i, name) in layout.names().iter().enumerate() {
            m.add(name.clone(), self.m[i].clone())?;
            v.add(name.clone(), self.v[i].clone())?;
        }
        Ok((m, v, self.t))
    }

    pub fn import(&mut self, m: &ParamStore, v: &ParamStore, t: u64) -> Result<()> {
        if m.len() != self.m.len() || v.len() != self.v.len() {
            return Err(Error::Load("optimizer moment layout mismatch".into()));
        }
        for (i, ((_, mm), (_, vv))) in m.iter().zip(v.iter()).enumerate() {
            if mm.dim() != self.m[i].dim() || vv.dim() != self.v[i].dim() {
                return Err(Error::Load("optimizer moment shape mismatch".into()));
            }
            self.m[i].assign(mm);
            self.v[i].assign(vv);
        }
        self.t = t;
        Ok(())
    }
}

pub fn global_norm(grads: &[Array2<f64>]) -> f64 {
    grads
        .iter()
        .map(|g| g.iter().map(|x| x * x).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

/// In-place `avg <- decay * avg + (1 - decay) * current`.
pub fn ema_update(avg: &mut ParamStore, current: &ParamStore, decay: f64) -> Result<()> {
    if !avg.same_layout(current) {
        return Err(Error::Config("ema: parameter layouts differ".into()));
    }
    for ((_, mut a), (_, c)) in avg.iter_mut().zip(current.iter()) {
        ndarray::Zip::from(&mut a)
            .and(c)
            .for_each(|a, &c| *a = decay * *a + (1.0 - decay) * c);
    }
    Ok(())
}
