//! Sampling-only teachers.
//!
//! Training code only ever sees a [`BlackBox`]: prompt in, completed video
//! out. Analytic densities exist for some synthetic teachers and are kept on
//! [`TeacherHandle`], which the trainer never receives.

use std::collections::HashMap;
use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamW, Mat, ParamStore, Tape};
use crate::error::{Error, Result};
use crate::flowpath::{euler_integrate, fm_loss, FlowBatch, FlowField, Schedule};
use crate::nn::{one_hot, time_embedding, Activation, Mlp};
use crate::rng::{self, normal, normal_matrix, Rng};
use crate::student::{flatten_videos, Source, Video};

/// The clean-sample channel: `y ↦ x_0 ~ π_T(·|y)`.
pub trait Sampler: Send + Sync {
    fn name(&self) -> &str;
    fn prompts(&self) -> usize;
    fn blocks(&self) -> usize;
    fn dim(&self) -> usize;
    fn sample(&self, prompt: usize, rng: &mut Rng) -> Result<Video>;
}

/// Exact `log π_T(x_0 | y)`; verification only.
pub trait DensityOracle: Send + Sync {
    fn log_density(&self, video: &Video) -> Result<f64>;
}

fn check_prompt(prompt: usize, count: usize) -> Result<()> {
    if prompt >= count {
        return Err(Error::Input(format!("unknown prompt {prompt}; teacher has {count}")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Damped oscillator

/// Damped harmonic oscillator in `(position, velocity)`, discretized with
/// semi-implicit Euler:
///
/// ```text
/// v' = v - Δ (ω² p + 2 ζ ω v)
/// p' = p + Δ v'
/// ```
///
/// which is the linear recurrence `s_{k+1} = A s_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Oscillator {
    pub omega: f64,
    pub damping: f64,
    pub dt: f64,
}

impl Oscillator {
    pub fn transition(&self) -> [[f64; 2]; 2] {
        let (w, z, h) = (self.omega, self.damping, self.dt);
        let a10 = -h * w * w;
        let a11 = 1.0 - 2.0 * h * z * w;
        [[1.0 + h * a10, h * a11], [a10, a11]]
    }

    pub fn step(&self, s: &[f64]) -> [f64; 2] {
        let a = self.transition();
        [a[0][0] * s[0] + a[0][1] * s[1], a[1][0] * s[0] + a[1][1] * s[1]]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OscillatorConfig {
    pub prompts: usize,
    pub blocks: usize,
    /// ω for prompt `y` is `omega_min + y * omega_step`.
    pub omega_min: f64,
    pub omega_step: f64,
    /// ζ for prompt `y` is `damping_min + y * damping_step`.
    pub damping_min: f64,
    pub damping_step: f64,
    pub dt: f64,
    /// Process noise added at every transition.
    pub sigma_obs: f64,
    /// Initial position magnitude; the sign is drawn uniformly.
    pub init_position: f64,
    pub init_std: f64,
    /// Multiplies every ω (used for deliberately mismatched sources).
    pub frequency_scale: f64,
}

impl Default for OscillatorConfig {
    fn default() -> Self {
        Self {
            prompts: 8,
            blocks: 8,
            omega_min: 1.0,
            omega_step: 0.25,
            damping_min: 0.05,
            damping_step: 0.02,
            dt: 0.25,
            sigma_obs: 0.3,
            init_position: 1.0,
            init_std: 0.15,
            frequency_scale: 1.0,
        }
    }
}

impl OscillatorConfig {
    pub fn dynamics(&self, prompt: usize) -> Oscillator {
        Oscillator {
            omega: (self.omega_min + prompt as f64 * self.omega_step) * self.frequency_scale,
            damping: self.damping_min + prompt as f64 * self.damping_step,
            dt: self.dt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.prompts == 0 || self.blocks == 0 {
            return Err(Error::Config("oscillator needs prompts and blocks".into()));
        }
        if !(self.dt > 0.0) || self.sigma_obs < 0.0 || self.init_std < 0.0 {
            return Err(Error::Config("oscillator dt must be positive and noise levels non-negative".into()));
        }
        Ok(())
    }
}

/// Physics teacher: per-prompt oscillator trajectories with process noise.
#[derive(Debug, Clone)]
pub struct PhysicsTeacher {
    pub cfg: OscillatorConfig,
    name: String,
}

impl PhysicsTeacher {
    pub fn new(cfg: OscillatorConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            name: "oscillator".into(),
        })
    }

    pub fn dynamics(&self, prompt: usize) -> Oscillator {
        self.cfg.dynamics(prompt)
    }

    fn initial_state(&self, rng: &mut Rng) -> [f64; 2] {
        use rand::Rng as _;
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        [
            sign * self.cfg.init_position + self.cfg.init_std * normal(rng),
            self.cfg.init_std * normal(rng),
        ]
    }

    fn log_normal2(x: &[f64], mean: &[f64], std: f64) -> f64 {
        let q = (x[0] - mean[0]).powi(2) + (x[1] - mean[1]).powi(2);
        -q / (2.0 * std * std) - (2.0 * PI * std * std).ln()
    }
}

impl Sampler for PhysicsTeacher {
    fn name(&self) -> &str {
        &self.name
    }
    fn prompts(&self) -> usize {
        self.cfg.prompts
    }
    fn blocks(&self) -> usize {
        self.cfg.blocks
    }
    fn dim(&self) -> usize {
        2
    }

    fn sample(&self, prompt: usize, rng: &mut Rng) -> Result<Video> {
        check_prompt(prompt, self.cfg.prompts)?;
        let dynamics = self.dynamics(prompt);
        let mut blocks = Mat::zeros((self.cfg.blocks, 2));
        let mut s = self.initial_state(rng);
        for k in 0..self.cfg.blocks {
            if k > 0 {
                let next = dynamics.step(&s);
                s = [
                    next[0] + self.cfg.sigma_obs * normal(rng),
                    next[1] + self.cfg.sigma_obs * normal(rng),
                ];
            }
            blocks[[k, 0]] = s[0];
            blocks[[k, 1]] = s[1];
        }
        Video::new(blocks, prompt, Source::Teacher)
    }
}

impl DensityOracle for PhysicsTeacher {
    fn log_density(&self, video: &Video) -> Result<f64> {
        check_prompt(video.prompt, self.cfg.prompts)?;
        if self.cfg.sigma_obs == 0.0 || self.cfg.init_std == 0.0 {
            return Err(Error::Capability("degenerate oscillator has no density".into()));
        }
        let dynamics = self.dynamics(video.prompt);
        let b = &video.blocks;
        let x1 = [b[[0, 0]], b[[0, 1]]];
        let p = self.cfg.init_position;
        let lp = Self::log_normal2(&x1, &[p, 0.0], self.cfg.init_std);
        let lm = Self::log_normal2(&x1, &[-p, 0.0], self.cfg.init_std);
        let hi = lp.max(lm);
        let mut total = hi + (0.5 * ((lp - hi).exp() + (lm - hi).exp())).ln();
        for k in 1..b.nrows() {
            let prev = [b[[k - 1, 0]], b[[k - 1, 1]]];
            let mean = dynamics.step(&prev);
            total += Self::log_normal2(&[b[[k, 0]], b[[k, 1]]], &mean, self.cfg.sigma_obs);
        }
        Ok(total)
    }
}

// ---------------------------------------------------------------------------
// Domain-shifted oscillator

/// The oscillator seen through a fixed affine warp with its own noise level;
/// stands in for an abrupt change of visual domain.
#[derive(Debug, Clone)]
pub struct ShiftedTeacher {
    base: PhysicsTeacher,
    warp: [[f64; 2]; 2],
    offset: [f64; 2],
    name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShiftConfig {
    pub warp: [[f64; 2]; 2],
    pub offset: [f64; 2],
    pub sigma_obs: f64,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        Self {
            warp: [[0.8, 0.3], [-0.2, 1.1]],
            offset: [0.5, -0.25],
            sigma_obs: 0.2,
        }
    }
}

impl ShiftedTeacher {
    pub fn new(mut osc: OscillatorConfig, shift: &ShiftConfig) -> Result<Self> {
        osc.sigma_obs = shift.sigma_obs;
        Ok(Self {
            base: PhysicsTeacher::new(osc)?,
            warp: shift.warp,
            offset: shift.offset,
            name: "shifted_oscillator".into(),
        })
    }
}

impl Sampler for ShiftedTeacher {
    fn name(&self) -> &str {
        &self.name
    }
    fn prompts(&self) -> usize {
        self.base.prompts()
    }
    fn blocks(&self) -> usize {
        self.base.blocks()
    }
    fn dim(&self) -> usize {
        2
    }
    fn sample(&self, prompt: usize, rng: &mut Rng) -> Result<Video> {
        let mut v = self.base.sample(prompt, rng)?;
        for mut row in v.blocks.rows_mut() {
            let (a, b) = (row[0], row[1]);
            row[0] = self.warp[0][0] * a + self.warp[0][1] * b + self.offset[0];
            row[1] = self.warp[1][0] * a + self.warp[1][1] * b + self.offset[1];
        }
        Ok(v)
    }
}

// ---------------------------------------------------------------------------
// Gaussian mixture

/// Per-prompt two-component isotropic Gaussian mixture over flattened videos.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureConfig {
    pub blocks: usize,
    pub dim: usize,
    /// `means[prompt][component]` is a flattened video of length `blocks * dim`.
    pub means: Vec<[Vec<f64>; 2]>,
    pub weights: Vec<[f64; 2]>,
    pub std: f64,
}

impl MixtureConfig {
    /// Random means in `[-2, 2]` and weights in `[0.25, 0.75]`.
    pub fn random(prompts: usize, blocks: usize, dim: usize, std: f64, seed: u64) -> Self {
        use rand::Rng as _;
        let mut rng = rng::stream(seed, &[rng::label("mixture")]);
        let width = blocks * dim;
        let means = (0..prompts)
            .map(|_| {
                [
                    (0..width).map(|_| rng.random_range(-2.0..2.0)).collect(),
                    (0..width).map(|_| rng.random_range(-2.0..2.0)).collect(),
                ]
            })
            .collect();
        let weights = (0..prompts)
            .map(|_| {
                let w = rng.random_range(0.25..0.75);
                [w, 1.0 - w]
            })
            .collect();
        Self {
            blocks,
            dim,
            means,
            weights,
            std,
        }
    }

    pub fn mean(&self, prompt: usize) -> Array1<f64> {
        let [a, b] = &self.means[prompt];
        let [wa, wb] = self.weights[prompt];
        Array1::from_iter(a.iter().zip(b).map(|(x, y)| wa * x + wb * y))
    }
}

#[derive(Debug, Clone)]
pub struct MixtureTeacher {
    pub cfg: MixtureConfig,
}

impl MixtureTeacher {
    pub fn new(cfg: MixtureConfig) -> Result<Self> {
        let width = cfg.blocks * cfg.dim;
        if cfg.means.len() != cfg.weights.len() || cfg.means.is_empty() {
            return Err(Error::Config("mixture: one mean pair and weight pair per prompt".into()));
        }
        if cfg.means.iter().any(|[a, b]| a.len() != width || b.len() != width) {
            return Err(Error::Config(format!("mixture: means must have length {width}")));
        }
        if cfg.weights.iter().any(|w| w[0] < 0.0 || w[1] < 0.0 || (w[0] + w[1] - 1.0).abs() > 1e-9) {
            return Err(Error::Config("mixture: weights must be a probability pair".into()));
        }
        if !(cfg.std > 0.0) {
            return Err(Error::Config("mixture: std must be positive".into()));
        }
        Ok(Self { cfg })
    }
}

impl Sampler for MixtureTeacher {
    fn name(&self) -> &str {
        "mixture"
    }
    fn prompts(&self) -> usize {
        self.cfg.means.len()
    }
    fn blocks(&self) -> usize {
        self.cfg.blocks
    }
    fn dim(&self) -> usize {
        self.cfg.dim
    }
    fn sample(&self, prompt: usize, rng: &mut Rng) -> Result<Video> {
        use rand::Rng as _;
        check_prompt(prompt, self.prompts())?;
        let c = if rng.random::<f64>() < self.cfg.weights[prompt][0] { 0 } else { 1 };
        let mean = &self.cfg.means[prompt][c];
        let flat: Vec<f64> = mean.iter().map(|m| m + self.cfg.std * normal(rng)).collect();
        let blocks = Array2::from_shape_vec((self.cfg.blocks, self.cfg.dim), flat).expect("mixture shape");
        Video::new(blocks, prompt, Source::Teacher)
    }
}

impl DensityOracle for MixtureTeacher {
    fn log_density(&self, video: &Video) -> Result<f64> {
        check_prompt(video.prompt, self.prompts())?;
        let x = video.flatten();
        let s2 = self.cfg.std * self.cfg.std;
        let norm = -0.5 * x.len() as f64 * (2.0 * PI * s2).ln();
        let logs: Vec<f64> = (0..2)
            .map(|c| {
                let q: f64 = x
                    .iter()
                    .zip(&self.cfg.means[video.prompt][c])
                    .map(|(a, m)| (a - m).powi(2))
                    .sum();
                self.cfg.weights[video.prompt][c].ln() + norm - q / (2.0 * s2)
            })
            .collect();
        let hi = logs[0].max(logs[1]);
        Ok(hi + ((logs[0] - hi).exp() + (logs[1] - hi).exp()).ln())
    }
}

// ---------------------------------------------------------------------------
// Hidden flow teacher

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HiddenFlowConfig {
    pub hidden: usize,
    pub layers: usize,
    pub time_embed: usize,
    pub prompt_width: usize,
    /// Euler steps used when sampling.
    pub sample_steps: usize,
    pub train_steps: usize,
    pub batch: usize,
    pub lr: f64,
    /// Training data pool size per prompt.
    pub pool: usize,
}

impl Default for HiddenFlowConfig {
    fn default() -> Self {
        Self {
            hidden: 96,
            layers: 2,
            time_embed: 16,
            prompt_width: 8,
            sample_steps: 64,
            train_steps: 5000,
            batch: 128,
            lr: 2e-3,
            pool: 2048,
        }
    }
}

/// A non-causal flow model that generates all blocks jointly from a single
/// noise draw. Its architecture, width and step count differ from the
/// student's, and nothing but completed samples leaves it.
#[derive(Debug, Clone)]
pub struct HiddenFlowTeacher {
    cfg: HiddenFlowConfig,
    prompts: usize,
    blocks: usize,
    dim: usize,
    mlp: Mlp,
    prompt_emb: crate::autodiff::ParamId,
    params: ParamStore,
}

struct JointField<'a> {
    mlp: &'a Mlp,
    prompt_emb: crate::autodiff::ParamId,
    time_embed: usize,
    prompts: usize,
}

impl FlowField for JointField<'_> {
    type Ctx = Vec<usize>;

    fn velocity(&self, tape: &mut Tape, params: &crate::autodiff::Bound, x_t: crate::autodiff::Var, t: &[f64], prompts: &Vec<usize>) -> Result<crate::autodiff::Var> {
        let temb = tape.constant(time_embedding(t, self.time_embed))?;
        let oh = tape.constant(one_hot(prompts, self.prompts)?)?;
        let p = tape.matmul(oh, params.var(self.prompt_emb))?;
        let input = tape.concat(&[x_t, temb, p])?;
        self.mlp.forward(tape, params, input)
    }
}

impl HiddenFlowTeacher {
    fn layout(cfg: &HiddenFlowConfig, width: usize) -> Vec<usize> {
        let mut sizes = vec![width + cfg.time_embed + cfg.prompt_width];
        sizes.extend(std::iter::repeat_n(cfg.hidden, cfg.layers));
        sizes.push(width);
        sizes
    }

    fn field(&self) -> JointField<'_> {
        JointField {
            mlp: &self.mlp,
            prompt_emb: self.prompt_emb,
            time_embed: self.cfg.time_embed,
            prompts: self.prompts,
        }
    }

    /// Fit the joint flow by plain flow matching on samples of `target`.
    pub fn train(target: &dyn Sampler, cfg: HiddenFlowConfig, seed: u64) -> Result<Self> {
        let (prompts, blocks, dim) = (target.prompts(), target.blocks(), target.dim());
        let width = blocks * dim;
        let mut rng = rng::stream(seed, &[rng::label("hidden_flow_init")]);
        let mut params = ParamStore::new();
        let prompt_emb = params.add(
            "prompt_emb",
            crate::autodiff::glorot(prompts, cfg.prompt_width, &mut rng),
        )?;
        let mlp = Mlp::init(&mut params, "joint", &Self::layout(&cfg, width), Activation::Silu, &mut rng)?;
        params.set_meta("kind", "hidden_flow_teacher");
        params.set_meta("geometry", format!("prompts={prompts},blocks={blocks},dim={dim}"));
        let mut teacher = Self {
            cfg,
            prompts,
            blocks,
            dim,
            mlp,
            prompt_emb,
            params,
        };

        let mut pool = Vec::with_capacity(prompts * teacher.cfg.pool);
        for p in 0..prompts {
            for j in 0..teacher.cfg.pool {
                let mut r = rng::stream(seed, &[rng::label("hidden_flow_data"), p as u64, j as u64]);
                pool.push(target.sample(p, &mut r)?);
            }
        }
        let mut opt = AdamW::new(teacher.cfg.lr, &teacher.params);
        opt.weight_decay = 0.0;
        for step in 0..teacher.cfg.train_steps {
            use rand::Rng as _;
            let mut r = rng::stream(seed, &[rng::label("hidden_flow_step"), step as u64]);
            let picks: Vec<&Video> = (0..teacher.cfg.batch)
                .map(|_| &pool[r.random_range(0..pool.len())])
                .collect();
            let x0 = flatten_videos(&picks.iter().map(|v| (*v).clone()).collect::<Vec<_>>());
            let ctx: Vec<usize> = picks.iter().map(|v| v.prompt).collect();
            let batch = FlowBatch::sample(x0, Schedule::RectifiedFlow, ctx, &mut r)?;
            let mut tape = Tape::new();
            let bound = tape.bind(&teacher.params)?;
            let loss = fm_loss(&mut tape, &bound, &teacher.field(), &batch)?;
            let grads = bound.collect(&tape.backward(loss)?);
            // cosine decay to 5% of the base rate
            let frac = step as f64 / teacher.cfg.train_steps.max(1) as f64;
            opt.lr = teacher.cfg.lr * (0.05 + 0.95 * 0.5 * (1.0 + (PI * frac).cos()));
            opt.step(&mut teacher.params, &grads)?;
        }
        Ok(teacher)
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        self.params.save(path)
    }

    pub fn load(path: &std::path::Path, cfg: HiddenFlowConfig, prompts: usize, blocks: usize, dim: usize) -> Result<Self> {
        let params = ParamStore::load(path)?;
        let expected = format!("prompts={prompts},blocks={blocks},dim={dim}");
        if params.meta().get("geometry") != Some(&expected) {
            return Err(Error::Load(format!("hidden flow checkpoint geometry differs from `{expected}`")));
        }
        let prompt_emb = crate::nn::expect_param(&params, "prompt_emb", (prompts, cfg.prompt_width))?;
        let mlp = Mlp::attach(&params, "joint", &Self::layout(&cfg, blocks * dim), Activation::Silu)?;
        Ok(Self {
            cfg,
            prompts,
            blocks,
            dim,
            mlp,
            prompt_emb,
            params,
        })
    }
}

impl Sampler for HiddenFlowTeacher {
    fn name(&self) -> &str {
        "hidden_flow"
    }
    fn prompts(&self) -> usize {
        self.prompts
    }
    fn blocks(&self) -> usize {
        self.blocks
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn sample(&self, prompt: usize, rng: &mut Rng) -> Result<Video> {
        check_prompt(prompt, self.prompts)?;
        let width = self.blocks * self.dim;
        let x1 = normal_matrix(1, width, rng);
        let field = self.field();
        let x0 = euler_integrate(
            |x, t| {
                let mut tape = Tape::new();
                let bound = tape.bind_frozen(&self.params)?;
                let xv = tape.constant(x.clone())?;
                let v = field.velocity(&mut tape, &bound, xv, &[t], &vec![prompt])?;
                Ok(tape.value(v).clone())
            },
            x1,
            self.cfg.sample_steps,
        )?;
        let blocks = Array2::from_shape_vec((self.blocks, self.dim), x0.iter().copied().collect()).expect("shape");
        Video::new(blocks, prompt, Source::Teacher)
    }
}

// ---------------------------------------------------------------------------
// Handles and the black-box view

pub struct TeacherHandle {
    sampler: Box<dyn Sampler>,
    oracle: Option<Box<dyn DensityOracle>>,
}

impl TeacherHandle {
    pub fn physics(cfg: OscillatorConfig) -> Result<Self> {
        let t = PhysicsTeacher::new(cfg)?;
        Ok(Self {
            sampler: Box::new(t.clone()),
            oracle: Some(Box::new(t)),
        })
    }

    pub fn mixture(cfg: MixtureConfig) -> Result<Self> {
        let t = MixtureTeacher::new(cfg)?;
        Ok(Self {
            sampler: Box::new(t.clone()),
            oracle: Some(Box::new(t)),
        })
    }

    pub fn shifted(osc: OscillatorConfig, shift: &ShiftConfig) -> Result<Self> {
        Ok(Self {
            sampler: Box::new(ShiftedTeacher::new(osc, shift)?),
            oracle: None,
        })
    }

    pub fn hidden_flow(t: HiddenFlowTeacher) -> Self {
        Self {
            sampler: Box::new(t),
            oracle: None,
        }
    }

    pub fn name(&self) -> &str {
        self.sampler.name()
    }

    pub fn sample(&self, prompt: usize, rng: &mut Rng) -> Result<Video> {
        self.sampler.sample(prompt, rng)
    }

    pub fn has_oracle(&self) -> bool {
        self.oracle.is_some()
    }

    /// Drop any oracle capability; what remains can only sample.
    pub fn into_black_box(self) -> BlackBox {
        BlackBox { sampler: self.sampler }
    }
}

/// Exact teacher log-density. Fails with a capability error for teachers that
/// only sample.
pub fn oracle_log_density(handle: &TeacherHandle, video: &Video) -> Result<f64> {
    match &handle.oracle {
        Some(o) => o.log_density(video),
        None => Err(Error::Capability(format!(
            "teacher `{}` exposes samples only; no density available",
            handle.name()
        ))),
    }
}

/// Sampling-only teacher view handed to training code.
pub struct BlackBox {
    sampler: Box<dyn Sampler>,
}

impl BlackBox {
    pub fn new(sampler: Box<dyn Sampler>) -> Self {
        Self { sampler }
    }

    pub fn name(&self) -> &str {
        self.sampler.name()
    }

    pub fn prompts(&self) -> usize {
        self.sampler.prompts()
    }

    pub fn blocks(&self) -> usize {
        self.sampler.blocks()
    }

    pub fn dim(&self) -> usize {
        self.sampler.dim()
    }

    pub fn sample(&self, prompt: usize, rng: &mut Rng) -> Result<Video> {
        self.sampler.sample(prompt, rng)
    }
}

/// Finite per-prompt pool of teacher draws, fetched lazily and cached by
/// `(prompt, draw index)`. Draw `j` of prompt `y` is a deterministic function
/// of the pool seed, so cached and fresh queries agree.
pub struct TeacherPool {
    teacher: BlackBox,
    seed: u64,
    draws_per_prompt: usize,
    cache: HashMap<(usize, usize), Video>,
    queries: u64,
}

impl TeacherPool {
    pub fn new(teacher: BlackBox, seed: u64, draws_per_prompt: usize) -> Result<Self> {
        if draws_per_prompt == 0 {
            return Err(Error::Config("teacher pool needs at least one draw per prompt".into()));
        }
        Ok(Self {
            teacher,
            seed,
            draws_per_prompt,
            cache: HashMap::new(),
            queries: 0,
        })
    }

    pub fn teacher(&self) -> &BlackBox {
        &self.teacher
    }

    pub fn draws_per_prompt(&self) -> usize {
        self.draws_per_prompt
    }

    /// Total number of queries served so far.
    pub fn queries(&self) -> u64 {
        self.queries
    }

    pub fn query(&mut self, prompt: usize, draw: usize) -> Result<Video> {
        check_prompt(prompt, self.teacher.prompts())?;
        let draw = draw % self.draws_per_prompt;
        self.queries += 1;
        if let Some(v) = self.cache.get(&(prompt, draw)) {
            return Ok(v.clone());
        }
        let mut r = rng::stream(self.seed, &[rng::label("teacher_pool"), prompt as u64, draw as u64]);
        let v = self.teacher.sample(prompt, &mut r)?;
        self.cache.insert((prompt, draw), v.clone());
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn oscillator_recurrence_within_three_sigma() {
        let t = PhysicsTeacher::new(OscillatorConfig::default()).unwrap();
        let sigma = t.cfg.sigma_obs;
        let mut violations = 0;
        let mut total = 0;
        for i in 0..200 {
            let prompt = i % 8;
            let v = t.sample(prompt, &mut stream(i as u64, &[])).unwrap();
            let dynamics = t.dynamics(prompt);
            for k in 1..v.num_blocks() {
                let pred = dynamics.step(&[v.blocks[[k - 1, 0]], v.blocks[[k - 1, 1]]]);
                for j in 0..2 {
                    total += 1;
                    if (v.blocks[[k, j]] - pred[j]).abs() > 3.0 * sigma {
                        violations += 1;
                    }
                }
            }
        }
        // Gaussian tail beyond 3σ is 0.27%; allow 1%.
        assert!((violations as f64) < 0.01 * total as f64, "{violations}/{total}");
    }

    #[test]
    fn unknown_prompt_is_input_error() {
        let t = PhysicsTeacher::new(OscillatorConfig::default()).unwrap();
        assert!(matches!(t.sample(8, &mut stream(0, &[])), Err(Error::Input(_))));
    }

    #[test]
    fn teachers_are_deterministic_per_seed() {
        let t = TeacherHandle::physics(OscillatorConfig::default()).unwrap();
        let a = t.sample(3, &mut stream(5, &[])).unwrap();
        let b = t.sample(3, &mut stream(5, &[])).unwrap();
        assert_eq!(a, b);
        let m = TeacherHandle::mixture(MixtureConfig::random(2, 2, 2, 0.3, 1)).unwrap();
        assert_eq!(m.sample(1, &mut stream(5, &[])).unwrap(), m.sample(1, &mut stream(5, &[])).unwrap());
    }

    #[test]
    fn mixture_empirical_mean() {
        let cfg = MixtureConfig::random(2, 3, 2, 0.5, 17);
        let t = MixtureTeacher::new(cfg.clone()).unwrap();
        let n = 10_000;
        let mut rng = stream(2, &[]);
        let mut acc = Array1::<f64>::zeros(6);
        for _ in 0..n {
            acc += &t.sample(1, &mut rng).unwrap().flatten();
        }
        acc /= n as f64;
        let expected = cfg.mean(1);
        for (a, e) in acc.iter().zip(expected.iter()) {
            assert!((a - e).abs() < 0.05, "{a} vs {e}");
        }
    }

    #[test]
    fn mixture_density_at_component_mean() {
        let cfg = MixtureConfig {
            blocks: 1,
            dim: 2,
            means: vec![[vec![0.0, 0.0], vec![3.0, 0.0]]],
            weights: vec![[0.3, 0.7]],
            std: 0.5,
        };
        let h = TeacherHandle::mixture(cfg).unwrap();
        let v = Video::new(ndarray::array![[0.0, 0.0]], 0, Source::Teacher).unwrap();
        let s2 = 0.25;
        let n0 = 1.0 / (2.0 * PI * s2);
        let n1 = n0 * (-9.0 / (2.0 * s2)).exp();
        let expected = (0.3 * n0 + 0.7 * n1).ln();
        assert!((oracle_log_density(&h, &v).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn mixture_density_integrates_to_one() {
        let cfg = MixtureConfig {
            blocks: 1,
            dim: 1,
            means: vec![[vec![-1.0], vec![1.5]]],
            weights: vec![[0.4, 0.6]],
            std: 0.7,
        };
        let h = TeacherHandle::mixture(cfg).unwrap();
        // trapezoid rule on [-10, 10]
        let n = 20_000;
        let dx = 20.0 / n as f64;
        let mut total = 0.0;
        for i in 0..=n {
            let x = -10.0 + i as f64 * dx;
            let v = Video::new(ndarray::array![[x]], 0, Source::Teacher).unwrap();
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            total += w * oracle_log_density(&h, &v).unwrap().exp() * dx;
        }
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }

    #[test]
    fn physics_density_matches_noise_model() {
        let mut cfg = OscillatorConfig::default();
        cfg.blocks = 2;
        let h = TeacherHandle::physics(cfg.clone()).unwrap();
        let dynamics = cfg.dynamics(0);
        let b = ndarray::array![[1.0, 0.0], [0.0, 0.0]];
        let mean = dynamics.step(&[1.0, 0.0]);
        let s = cfg.sigma_obs;
        let l1 = -((2.0 * PI * cfg.init_std.powi(2)).ln()) + (0.5f64).ln()
            + (1.0 + (-(4.0) / (2.0 * cfg.init_std.powi(2))).exp()).ln();
        let l2 = -(mean[0].powi(2) + mean[1].powi(2)) / (2.0 * s * s) - (2.0 * PI * s * s).ln();
        let v = Video::new(b, 0, Source::Teacher).unwrap();
        assert!((oracle_log_density(&h, &v).unwrap() - (l1 + l2)).abs() < 1e-10);
    }

    #[test]
    fn sampling_only_teachers_refuse_density() {
        let h = TeacherHandle::shifted(OscillatorConfig::default(), &ShiftConfig::default()).unwrap();
        let v = h.sample(0, &mut stream(0, &[])).unwrap();
        assert!(matches!(oracle_log_density(&h, &v), Err(Error::Capability(_))));
        assert!(!h.has_oracle());
    }

    #[test]
    fn shifted_teacher_applies_warp() {
        let osc = OscillatorConfig::default();
        let shift = ShiftConfig::default();
        let h = TeacherHandle::shifted(osc.clone(), &shift).unwrap();
        let mut base_cfg = osc;
        base_cfg.sigma_obs = shift.sigma_obs;
        let base = PhysicsTeacher::new(base_cfg).unwrap();
        let a = h.sample(2, &mut stream(4, &[])).unwrap();
        let b = base.sample(2, &mut stream(4, &[])).unwrap();
        let (x, y) = (b.blocks[[3, 0]], b.blocks[[3, 1]]);
        assert!((a.blocks[[3, 0]] - (0.8 * x + 0.3 * y + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn pool_counts_queries_and_caches() {
        let bb = TeacherHandle::physics(OscillatorConfig::default()).unwrap().into_black_box();
        let mut pool = TeacherPool::new(bb, 3, 4).unwrap();
        let a = pool.query(1, 2).unwrap();
        let b = pool.query(1, 6).unwrap();
        assert_eq!(a, b);
        assert_eq!(pool.queries(), 2);
        assert!(pool.query(9, 0).is_err());
    }
}
