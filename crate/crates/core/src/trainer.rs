//! The training loop: on-policy collection, discriminator update, student
//! update, parameter averaging, checkpoints and metric logs.

use std::path::Path;

use rand::Rng as _;

use crate::autodiff::{ema_update, AdamW, ParamStore, Tape};
use crate::baselines::{dmd_scaffold_loss, rollout_graph, sft_loss, videos_from_flat};
use crate::config::{Arm, RolloutPolicy, RunConfig, TeacherSpec};
use crate::discriminator::{advantages, disc_step, jitter, mean_reward, Discriminator, StdTracker};
use crate::error::{Error, Result};
use crate::eval::metrics::{mean_physics_residual, prompt_sliced_wasserstein};
use crate::flowpath::fm_loss;
use crate::objective::{afd_loss, Anchor};
use crate::rng::{label, stream, Rng};
use crate::student::{Source, StudentField, Video};
use crate::teacher::{
    BlackBox, HiddenFlowTeacher, MixtureConfig, Oscillator, OscillatorConfig, PhysicsTeacher, Sampler, TeacherHandle,
    TeacherPool,
};

const STATE_KIND: &str = "train_state";

/// Everything that changes during training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub step: u64,
    pub theta: ParamStore,
    pub ema: ParamStore,
    pub reference: ParamStore,
    pub phi: ParamStore,
    pub opt_theta: AdamW,
    pub opt_phi: AdamW,
    pub tracker: StdTracker,
}

impl TrainState {
    fn to_store(&self, cfg: &RunConfig) -> Result<ParamStore> {
        let mut s = ParamStore::new();
        s.extend_prefixed("theta/", &self.theta)?;
        s.extend_prefixed("ema/", &self.ema)?;
        s.extend_prefixed("ref/", &self.reference)?;
        s.extend_prefixed("phi/", &self.phi)?;
        let (m, v, t) = self.opt_theta.export(&self.theta)?;
        s.extend_prefixed("adam_theta_m/", &m)?;
        s.extend_prefixed("adam_theta_v/", &v)?;
        s.set_meta("adam_theta_t", t.to_string());
        let (m, v, t) = self.opt_phi.export(&self.phi)?;
        s.extend_prefixed("adam_phi_m/", &m)?;
        s.extend_prefixed("adam_phi_v/", &v)?;
        s.set_meta("adam_phi_t", t.to_string());
        s.add("tracker", self.tracker.to_matrix())?;
        s.set_meta("kind", STATE_KIND);
        s.set_meta("step", self.step.to_string());
        s.set_meta("seed", cfg.seed.to_string());
        s.set_meta("arm", cfg.arm.name());
        s.set_meta("geometry", cfg.student.tag());
        s.set_meta("disc_geometry", cfg.disc_geometry().tag());
        Ok(s)
    }

    fn from_store(s: &ParamStore, cfg: &RunConfig) -> Result<Self> {
        if s.meta().get("kind").map(String::as_str) != Some(STATE_KIND) {
            return Err(Error::Load("not a training checkpoint".into()));
        }
        let meta = |k: &str| -> Result<String> {
            s.meta()
                .get(k)
                .cloned()
                .ok_or_else(|| Error::Load(format!("checkpoint lacks `{k}`")))
        };
        if meta("geometry")? != cfg.student.tag() {
            return Err(Error::Load(format!(
                "checkpoint student geometry `{}` does not match configured `{}`",
                meta("geometry")?,
                cfg.student.tag()
            )));
        }
        if meta("disc_geometry")? != cfg.disc_geometry().tag() {
            return Err(Error::Load("checkpoint discriminator geometry does not match the config".into()));
        }
        let parse = |k: &str| -> Result<u64> { meta(k)?.parse().map_err(|_| Error::Load(format!("bad `{k}`"))) };
        let theta = s.extract_prefixed("theta/")?;
        let phi = s.extract_prefixed("phi/")?;
        let mut opt_theta = AdamW::new(cfg.eta_student(), &theta);
        opt_theta.import(
            &s.extract_prefixed("adam_theta_m/")?,
            &s.extract_prefixed("adam_theta_v/")?,
            parse("adam_theta_t")?,
        )?;
        let mut opt_phi = AdamW::new(cfg.eta_disc(), &phi);
        opt_phi.import(
            &s.extract_prefixed("adam_phi_m/")?,
            &s.extract_prefixed("adam_phi_v/")?,
            parse("adam_phi_t")?,
        )?;
        let tracker = StdTracker::from_matrix(
            s.by_name("tracker")
                .ok_or_else(|| Error::Load("checkpoint lacks tracker state".into()))?,
        )?;
        Ok(Self {
            step: parse("step")?,
            ema: s.extract_prefixed("ema/")?,
            reference: s.extract_prefixed("ref/")?,
            theta,
            phi,
            opt_theta,
            opt_phi,
            tracker,
        })
    }
}

/// One row of the per-step metric log.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepMetrics {
    pub step: u64,
    pub arm: String,
    /// `warmup` for discriminator-only steps, `train` otherwise.
    pub phase: String,
    pub disc_loss: Option<f64>,
    pub student_loss: Option<f64>,
    pub nft_loss: Option<f64>,
    pub prior_loss: Option<f64>,
    pub mean_reward: Option<f64>,
    pub mean_w: Option<f64>,
    pub disc_grad_norm: Option<f64>,
    pub student_grad_norm: Option<f64>,
    pub teacher_queries: u64,
}

pub const METRIC_COLUMNS: [&str; 12] = [
    "step",
    "arm",
    "phase",
    "disc_loss",
    "student_loss",
    "nft_loss",
    "prior_loss",
    "mean_reward",
    "mean_w",
    "disc_grad_norm",
    "student_grad_norm",
    "teacher_queries",
];

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v}")).unwrap_or_default()
}

impl StepMetrics {
    pub fn record(&self) -> Vec<String> {
        vec![
            self.step.to_string(),
            self.arm.clone(),
            self.phase.clone(),
            fmt_opt(self.disc_loss),
            fmt_opt(self.student_loss),
            fmt_opt(self.nft_loss),
            fmt_opt(self.prior_loss),
            fmt_opt(self.mean_reward),
            fmt_opt(self.mean_w),
            fmt_opt(self.disc_grad_norm),
            fmt_opt(self.student_grad_norm),
            self.teacher_queries.to_string(),
        ]
    }
}

/// Evaluation snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalMetrics {
    pub step: u64,
    pub sliced_wasserstein: f64,
    pub physics_residual: Option<f64>,
}

// ---------------------------------------------------------------------------
// Teachers and the base student

/// Build the teacher named by the config. A hidden flow teacher is loaded
/// from its checkpoint when one is configured and present, otherwise trained
/// (and saved there when a path is given).
pub fn build_teacher(spec: &TeacherSpec, blocks: usize, dim: usize, prompts: usize) -> Result<TeacherHandle> {
    match spec {
        TeacherSpec::Oscillator(o) => TeacherHandle::physics(o.clone()),
        TeacherSpec::Shifted { oscillator, shift } => TeacherHandle::shifted(oscillator.clone(), shift),
        TeacherSpec::Mixture { std, mixture_seed } => {
            TeacherHandle::mixture(MixtureConfig::random(prompts, blocks, dim, *std, *mixture_seed))
        }
        TeacherSpec::MixtureTable(m) => TeacherHandle::mixture(m.clone()),
        TeacherSpec::HiddenFlow { target, flow, checkpoint } => {
            if let Some(path) = checkpoint {
                if path.exists() {
                    let t = HiddenFlowTeacher::load(path, flow.clone(), target.prompts, target.blocks, 2)?;
                    return Ok(TeacherHandle::hidden_flow(t));
                }
            }
            let source = PhysicsTeacher::new(target.clone())?;
            let t = HiddenFlowTeacher::train(&source, flow.clone(), 0x7eac)?;
            if let Some(path) = checkpoint {
                t.save(path)?;
            }
            Ok(TeacherHandle::hidden_flow(t))
        }
    }
}

/// Source domain for pretraining: the configured oscillator (or the default
/// one for non-physics teachers) with its frequencies rescaled.
pub fn pretrain_source(cfg: &RunConfig) -> Result<PhysicsTeacher> {
    let mut osc = match &cfg.teacher {
        TeacherSpec::Oscillator(o) => o.clone(),
        TeacherSpec::Shifted { oscillator, .. } => oscillator.clone(),
        TeacherSpec::HiddenFlow { target, .. } => target.clone(),
        _ => OscillatorConfig {
            blocks: cfg.student.blocks,
            prompts: cfg.student.prompts,
            ..Default::default()
        },
    };
    osc.frequency_scale *= cfg.pretrain.frequency_scale;
    PhysicsTeacher::new(osc)
}

/// Train the base student by flow matching on `source` with its own
/// (ground-truth) prefixes. Calls `progress(step, loss)` after every step.
pub fn pretrain_on(
    cfg: &RunConfig,
    source: &dyn Sampler,
    mut progress: impl FnMut(usize, f64),
) -> Result<ParamStore> {
    let (field, mut params) = StudentField::init(&cfg.student, &mut stream(cfg.seed, &[label("student_init")]))?;
    let mut opt = AdamW::new(cfg.pretrain.lr, &params);
    for step in 0..cfg.pretrain.steps {
        let mut r = stream(cfg.seed, &[label("pretrain"), step as u64]);
        let videos = (0..cfg.pretrain.batch)
            .map(|_| {
                let p = r.random_range(0..cfg.student.prompts);
                source.sample(p, &mut r)
            })
            .collect::<Result<Vec<_>>>()?;
        let batch = StudentField::noised_states(&videos, cfg.schedule, &mut r)?;
        let mut tape = Tape::new();
        let bound = tape.bind(&params)?;
        let loss = fm_loss(&mut tape, &bound, &field, &batch).map_err(|e| e.in_phase("pretrain"))?;
        let value = tape.scalar(loss);
        let grads = bound.collect(&tape.backward(loss)?);
        let frac = step as f64 / cfg.pretrain.steps as f64;
        opt.lr = cfg.pretrain.lr * (0.1 + 0.9 * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos()));
        opt.step(&mut params, &grads).map_err(|e| e.in_phase("pretrain"))?;
        progress(step, value);
    }
    Ok(params)
}

pub fn pretrain(cfg: &RunConfig, progress: impl FnMut(usize, f64)) -> Result<ParamStore> {
    let source = pretrain_source(cfg)?;
    pretrain_on(cfg, &source, progress)
}

/// Student parameters from either a plain student checkpoint or a training
/// checkpoint of any arm (its live parameters are used).
pub fn load_student(path: &Path, cfg: &RunConfig) -> Result<ParamStore> {
    let store = ParamStore::load(path)?;
    let params = if store.meta().get("kind").map(String::as_str) == Some(STATE_KIND) {
        TrainState::from_store(&store, cfg)?.theta
    } else {
        store
    };
    StudentField::attach(&cfg.student, &params)?;
    Ok(params)
}

// ---------------------------------------------------------------------------
// Trainer

pub struct Trainer {
    pub cfg: RunConfig,
    pub student: StudentField,
    pub disc: Discriminator,
    pool: TeacherPool,
    pub state: TrainState,
}

impl Trainer {
    /// Fresh run from base student parameters; the discriminator is
    /// initialized from the run seed.
    pub fn new(cfg: RunConfig, base: ParamStore, teacher: BlackBox) -> Result<Self> {
        cfg.validate()?;
        if teacher.prompts() != cfg.student.prompts
            || teacher.blocks() != cfg.student.blocks
            || teacher.dim() != cfg.student.dim
        {
            return Err(Error::Config("teacher geometry does not match the student".into()));
        }
        let student = StudentField::attach(&cfg.student, &base)?;
        let (disc, phi) = Discriminator::init(&cfg.disc_geometry(), &mut stream(cfg.seed, &[label("disc_init")]))?;
        let state = TrainState {
            step: 0,
            ema: base.clone(),
            reference: base.clone(),
            opt_theta: AdamW::new(cfg.eta_student(), &base),
            opt_phi: AdamW::new(cfg.eta_disc(), &phi),
            theta: base,
            phi,
            tracker: StdTracker::new(cfg.student.prompts),
        };
        let pool = TeacherPool::new(teacher, cfg.seed, cfg.teacher_pool)?;
        Ok(Self {
            cfg,
            student,
            disc,
            pool,
            state,
        })
    }

    pub fn resume(cfg: RunConfig, checkpoint: &Path, teacher: BlackBox) -> Result<Self> {
        let store = ParamStore::load(checkpoint)?;
        let state = TrainState::from_store(&store, &cfg)?;
        let mut t = Self::new(cfg, state.reference.clone(), teacher)?;
        t.disc = Discriminator::attach(&t.cfg.disc_geometry(), &state.phi)?;
        t.state = state;
        Ok(t)
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        self.state.to_store(&self.cfg)?.save(path)
    }

    pub fn teacher_queries(&self) -> u64 {
        self.pool.queries()
    }

    fn step_rng(&self, phase: &str) -> Rng {
        stream(self.cfg.seed, &[label(phase), self.state.step])
    }

    fn disc_update(&mut self, teacher: &[Video], student: &[Video]) -> Result<(f64, f64)> {
        let sigma = self.cfg.discriminator.instance_noise;
        let mut r = self.step_rng("instance_noise");
        let teacher = jitter(teacher, sigma, &mut r);
        let student = jitter(student, sigma, &mut r);
        disc_step(
            &self.disc,
            &mut self.state.phi,
            &mut self.state.opt_phi,
            self.cfg.discriminator.loss,
            &teacher,
            &student,
        )
        .map_err(|e| e.in_phase("discriminator"))
    }

    fn rollout_streams(&self) -> Vec<Rng> {
        (0..self.cfg.batch)
            .map(|i| stream(self.cfg.seed, &[label("rollout"), self.state.step, i as u64]))
            .collect()
    }

    /// Phase 1 inputs: prompts and their teacher videos.
    fn collect_teacher(&mut self) -> Result<(Vec<usize>, Vec<Video>)> {
        let mut r = self.step_rng("prompts");
        let n_prompts = self.cfg.student.prompts;
        let group = self.cfg.group;
        let mut picks: Vec<(usize, usize)> = Vec::with_capacity(self.cfg.batch);
        for _ in 0..self.cfg.batch / group {
            let p = r.random_range(0..n_prompts);
            picks.extend((0..group).map(|_| (p, r.random_range(0..self.cfg.teacher_pool))));
        }
        let prompts = picks.iter().map(|p| p.0).collect();
        let videos = picks
            .iter()
            .map(|&(p, j)| self.pool.query(p, j))
            .collect::<Result<Vec<_>>>()?;
        Ok((prompts, videos))
    }

    /// Whether the next step only trains the discriminator.
    pub fn in_warmup(&self) -> bool {
        self.cfg.arm.uses_discriminator() && self.state.step < self.cfg.disc_warmup as u64
    }

    /// Steps still to run before the configured budget is spent.
    pub fn remaining(&self) -> u64 {
        (self.cfg.total_steps() as u64).saturating_sub(self.state.step)
    }

    /// Run one full training step.
    pub fn step(&mut self) -> Result<StepMetrics> {
        let before = self.pool.queries();
        let warmup = self.in_warmup();
        let mut m = match self.cfg.arm {
            _ if warmup => self.warmup_step()?,
            Arm::Base => StepMetrics::default(),
            Arm::Sft => self.sft_step()?,
            Arm::Afd | Arm::DmdScaffold => self.weighted_step()?,
            Arm::Gan => self.gan_step()?,
        };
        ema_update(&mut self.state.ema, &self.state.theta, self.cfg.afd.ema_decay)?;
        m.step = self.state.step;
        m.arm = self.cfg.arm.name().to_string();
        m.phase = if warmup { "warmup" } else { "train" }.to_string();
        m.teacher_queries = self.pool.queries() - before;
        self.state.step += 1;
        Ok(m)
    }

    fn warmup_step(&mut self) -> Result<StepMetrics> {
        let (prompts, teacher) = self.collect_teacher().map_err(|e| e.in_phase("collect"))?;
        let rollouts = self
            .student
            .rollout(&self.state.theta, &prompts, self.cfg.sample_steps, &mut self.rollout_streams())
            .map_err(|e| e.in_phase("collect"))?;
        let (disc_loss, disc_norm) = self.disc_update(&teacher, &rollouts)?;
        Ok(StepMetrics {
            disc_loss: Some(disc_loss),
            disc_grad_norm: Some(disc_norm),
            ..Default::default()
        })
    }

    fn sft_step(&mut self) -> Result<StepMetrics> {
        let (_, teacher) = self.collect_teacher().map_err(|e| e.in_phase("collect"))?;
        let mut r = self.step_rng("noise");
        let mut tape = Tape::new();
        let bound = tape.bind(&self.state.theta)?;
        let loss = sft_loss(&mut tape, &bound, &self.student, &teacher, self.cfg.schedule, &mut r)
            .map_err(|e| e.in_phase("student"))?;
        let value = tape.scalar(loss);
        let grads = bound.collect(&tape.backward(loss)?);
        let norm = self
            .state
            .opt_theta
            .step(&mut self.state.theta, &grads)
            .map_err(|e| e.in_phase("student"))?;
        Ok(StepMetrics {
            student_loss: Some(value),
            student_grad_norm: Some(norm),
            ..Default::default()
        })
    }

    fn weighted_step(&mut self) -> Result<StepMetrics> {
        // phase 1: collection
        let (prompts, teacher) = self.collect_teacher().map_err(|e| e.in_phase("collect"))?;
        let policy = match self.cfg.rollout_policy {
            RolloutPolicy::Live => &self.state.theta,
            RolloutPolicy::Ema => &self.state.ema,
        };
        let rollouts = self
            .student
            .rollout(policy, &prompts, self.cfg.sample_steps, &mut self.rollout_streams())
            .map_err(|e| e.in_phase("collect"))?;

        // phase 2: discriminator and advantages
        let (disc_loss, disc_norm) = self.disc_update(&teacher, &rollouts)?;
        let s_student = self.disc.scores(&self.state.phi, &rollouts).map_err(|e| e.in_phase("reward"))?;
        let s_teacher = self.disc.scores(&self.state.phi, &teacher).map_err(|e| e.in_phase("reward"))?;
        let adv = advantages(&s_student, &prompts, self.cfg.afd.clip_max, &mut self.state.tracker)?;
        let k = self.cfg.student.blocks;
        let weights: Vec<f64> = adv.iter().flat_map(|a| std::iter::repeat_n(a.weight, k)).collect();
        let mean_w = adv.iter().map(|a| a.weight).sum::<f64>() / adv.len() as f64;

        // phase 3: student update on forward-noised rollouts
        let mut r = self.step_rng("noise");
        let batch = StudentField::noised_states(&rollouts, self.cfg.schedule, &mut r)?;
        let mut tape = Tape::new();
        let bound = tape.bind(&self.state.theta)?;
        let (loss, nft, prior) = if self.cfg.arm == Arm::Afd {
            let v_ref = self
                .student
                .eval(&self.state.reference, &batch.x_t, &batch.t, &batch.ctx)
                .map_err(|e| e.in_phase("student"))?;
            let v_old = match self.cfg.afd.anchor {
                Anchor::Live => None,
                Anchor::Ema => Some(
                    self.student
                        .eval(&self.state.ema, &batch.x_t, &batch.t, &batch.ctx)
                        .map_err(|e| e.in_phase("student"))?,
                ),
            };
            let l = afd_loss(&mut tape, &bound, &self.student, &batch, &v_ref, v_old.as_ref(), &weights, &self.cfg.afd)
                .map_err(|e| e.in_phase("student"))?;
            (l.total, Some(tape.scalar(l.nft)), Some(tape.scalar(l.prior)))
        } else {
            let l = dmd_scaffold_loss(&mut tape, &bound, &self.student, &batch, &weights)
                .map_err(|e| e.in_phase("student"))?;
            (l, None, None)
        };
        let value = tape.scalar(loss);
        let grads = bound.collect(&tape.backward(loss)?);
        let norm = self
            .state
            .opt_theta
            .step(&mut self.state.theta, &grads)
            .map_err(|e| e.in_phase("student"))?;
        Ok(StepMetrics {
            disc_loss: Some(disc_loss),
            student_loss: Some(value),
            nft_loss: nft,
            prior_loss: prior,
            mean_reward: Some(mean_reward(&s_teacher, &s_student)),
            mean_w: Some(mean_w),
            disc_grad_norm: Some(disc_norm),
            student_grad_norm: Some(norm),
            ..Default::default()
        })
    }

    fn gan_step(&mut self) -> Result<StepMetrics> {
        let (prompts, teacher) = self.collect_teacher().map_err(|e| e.in_phase("collect"))?;
        let mut tape = Tape::new();
        let theta = tape.bind(&self.state.theta)?;
        let flat = rollout_graph(
            &mut tape,
            &theta,
            &self.student,
            &prompts,
            self.cfg.sample_steps,
            &mut self.rollout_streams(),
        )
        .map_err(|e| e.in_phase("collect"))?;
        let g = &self.cfg.student;
        let rollouts = videos_from_flat(tape.value(flat), &prompts, g.blocks, g.dim, Source::Student)?;
        let (disc_loss, disc_norm) = self.disc_update(&teacher, &rollouts)?;
        let s_teacher = self.disc.scores(&self.state.phi, &teacher)?;
        let phi = tape.bind_frozen(&self.state.phi)?;
        let logits = self
            .disc
            .logits_var(&mut tape, &phi, flat, &prompts)
            .map_err(|e| e.in_phase("student"))?;
        let s_student: Vec<f64> = tape.value(logits).iter().copied().collect();
        let mean = tape.mean(logits)?;
        let loss = tape.scale(mean, -1.0)?;
        let value = tape.scalar(loss);
        let grads = theta.collect(&tape.backward(loss)?);
        let norm = self
            .state
            .opt_theta
            .step(&mut self.state.theta, &grads)
            .map_err(|e| e.in_phase("student"))?;
        Ok(StepMetrics {
            disc_loss: Some(disc_loss),
            student_loss: Some(value),
            mean_reward: Some(mean_reward(&s_teacher, &s_student)),
            disc_grad_norm: Some(disc_norm),
            student_grad_norm: Some(norm),
            ..Default::default()
        })
    }
}

// ---------------------------------------------------------------------------
// Evaluation

/// Fixed evaluation material shared by every arm of a seed: teacher reference
/// samples and the rollout noise streams.
pub struct EvalSet {
    pub teacher: Vec<Video>,
    pub prompts: Vec<usize>,
    seed: u64,
    projections: usize,
    dynamics: Option<OscillatorConfig>,
}

impl EvalSet {
    pub fn new(cfg: &RunConfig, teacher: &TeacherHandle) -> Result<Self> {
        let n = cfg.eval.samples_per_prompt;
        let prompts: Vec<usize> = (0..cfg.student.prompts).flat_map(|p| std::iter::repeat_n(p, n)).collect();
        let videos = prompts
            .iter()
            .enumerate()
            .map(|(i, &p)| teacher.sample(p, &mut stream(cfg.seed, &[label("eval_teacher"), i as u64])))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            teacher: videos,
            prompts,
            seed: cfg.seed,
            projections: cfg.eval.projections,
            dynamics: cfg.teacher.dynamics_source().cloned(),
        })
    }

    pub fn rollouts(&self, student: &StudentField, params: &ParamStore, steps: usize) -> Result<Vec<Video>> {
        let mut rngs: Vec<Rng> = (0..self.prompts.len())
            .map(|i| stream(self.seed, &[label("eval_rollout"), i as u64]))
            .collect();
        student.rollout(params, &self.prompts, steps, &mut rngs)
    }

    pub fn dynamics(&self, prompt: usize) -> Option<Oscillator> {
        self.dynamics.as_ref().map(|o| o.dynamics(prompt))
    }

    pub fn score(&self, videos: &[Video], step: u64) -> Result<EvalMetrics> {
        let mut r = stream(self.seed, &[label("eval_projections")]);
        let sw = prompt_sliced_wasserstein(videos, &self.teacher, self.projections, &mut r)?;
        let residual = match &self.dynamics {
            Some(o) => Some(mean_physics_residual(videos, |p| o.dynamics(p))?),
            None => None,
        };
        Ok(EvalMetrics {
            step,
            sliced_wasserstein: sw,
            physics_residual: residual,
        })
    }

    pub fn evaluate(&self, student: &StudentField, params: &ParamStore, steps: usize, step: u64) -> Result<EvalMetrics> {
        let videos = self.rollouts(student, params, steps)?;
        self.score(&videos, step)
    }
}

/// Convenience for tests: the base student and an oscillator-teacher trainer.
pub fn physics_trainer(cfg: RunConfig, base: ParamStore) -> Result<Trainer> {
    let TeacherSpec::Oscillator(o) = &cfg.teacher else {
        return Err(Error::Config("physics_trainer needs an oscillator teacher".into()));
    };
    let teacher = TeacherHandle::physics(o.clone())?.into_black_box();
    Trainer::new(cfg, base, teacher)
}
