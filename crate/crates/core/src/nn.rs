//! Small building blocks shared by the student, the discriminator and the
//! hidden flow teacher.

use ndarray::Array2;

use crate::autodiff::{glorot, Bound, Mat, ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Silu,
    Tanh,
}

/// Fully connected stack `in -> hidden^layers -> out`, activation between
/// hidden layers, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<(ParamId, ParamId)>,
    activation: Activation,
    input: usize,
    output: usize,
}

impl Mlp {
    pub fn init(
        store: &mut ParamStore,
        prefix: &str,
        sizes: &[usize],
        activation: Activation,
        rng: &mut Rng,
    ) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::Config("mlp needs at least input and output sizes".into()));
        }
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for (i, pair) in sizes.windows(2).enumerate() {
            let w = store.add(format!("{prefix}.{i}.w"), glorot(pair[0], pair[1], rng))?;
            let b = store.add(format!("{prefix}.{i}.b"), Array2::zeros((1, pair[1])))?;
            layers.push((w, b));
        }
        Ok(Self {
            layers,
            activation,
            input: sizes[0],
            output: *sizes.last().expect("sizes"),
        })
    }

    /// Resolve an MLP with the given layout from an existing store.
    pub fn attach(store: &ParamStore, prefix: &str, sizes: &[usize], activation: Activation) -> Result<Self> {
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for (i, pair) in sizes.windows(2).enumerate() {
            let w = expect_param(store, &format!("{prefix}.{i}.w"), (pair[0], pair[1]))?;
            let b = expect_param(store, &format!("{prefix}.{i}.b"), (1, pair[1]))?;
            layers.push((w, b));
        }
        Ok(Self {
            layers,
            activation,
            input: sizes[0],
            output: *sizes.last().expect("sizes"),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn output_dim(&self) -> usize {
        self.output
    }

    /// Scale the last layer's weights (small-output initialization).
    pub fn scale_output(&self, store: &mut ParamStore, factor: f64) {
        let (w, _) = *self.layers.last().expect("layers");
        store.view_mut(w).mapv_inplace(|x| x * factor);
    }

    pub fn forward(&self, tape: &mut Tape, params: &Bound, x: Var) -> Result<Var> {
        let mut h = x;
        let last = self.layers.len() - 1;
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            h = tape.matmul(h, params.var(w))?;
            h = tape.add_row(h, params.var(b))?;
            if i < last {
                h = match self.activation {
                    Activation::Silu => tape.silu(h)?,
                    Activation::Tanh => tape.tanh(h)?,
                };
            }
        }
        Ok(h)
    }
}

pub fn expect_param(store: &ParamStore, name: &str, shape: (usize, usize)) -> Result<ParamId> {
    let id = store
        .id(name)
        .ok_or_else(|| Error::Load(format!("missing parameter `{name}`")))?;
    if store.get(id).dim() != shape {
        return Err(Error::Load(format!(
            "parameter `{name}` has shape {:?}, expected {shape:?}",
            store.get(id).dim()
        )));
    }
    Ok(id)
}

/// Sinusoidal features of `t ∈ [0,1]` with log-spaced angular frequencies in
/// `[1, 100]`: `[sin(w_j t)..., cos(w_j t)...]`.
pub fn time_embedding(t: &[f64], width: usize) -> Mat {
    let half = width / 2;
    let freqs: Vec<f64> = (0..half)
        .map(|j| {
            if half > 1 {
                (j as f64 * 100f64.ln() / (half - 1) as f64).exp()
            } else {
                1.0
            }
        })
        .collect();
    Mat::from_shape_fn((t.len(), width), |(i, c)| {
        if c < half {
            (freqs[c] * t[i]).sin()
        } else if c < 2 * half {
            (freqs[c - half] * t[i]).cos()
        } else {
            t[i]
        }
    })
}

/// One-hot rows for integer labels.
pub fn one_hot(labels: &[usize], classes: usize) -> Result<Mat> {
    let mut m = Mat::zeros((labels.len(), classes));
    for (i, &l) in labels.iter().enumerate() {
        if l >= classes {
            return Err(Error::Input(format!("label {l} out of range 0..{classes}")));
        }
        m[[i, l]] = 1.0;
    }
    Ok(m)
}
