//! Closed-form and brute-force checks of the identities behind the method:
//! the optimal Bradley-Terry logit is the log density ratio, tilting the
//! student by that ratio gives the teacher, the signed regression converges
//! to the tilted conditional velocity, and the reward objective is a reverse
//! KL to the teacher.
//!
//! The oracles here never call the routines they check. Training helpers
//! (which do use the library's losses) are kept separate so a caller can
//! swap in any trained model.

use std::f64::consts::PI;

use rand::Rng as _;

use crate::autodiff::{AdamW, Bound, Mat, ParamStore, Tape, Var};
use crate::discriminator::{disc_step, DiscGeometry, DiscLoss, Discriminator};
use crate::error::{Error, Result};
use crate::eval::toys::{DiscreteToy, RatioCase, VelocityToy};
use crate::flowpath::{FlowBatch, FlowField, Schedule};
use crate::nn::{time_embedding, Activation, Mlp};
use crate::objective::nft_loss;
use crate::rng::{label, normal, normal_matrix, stream, Rng};
use crate::student::{Source, Video};
use crate::teacher::{oracle_log_density, TeacherHandle};

/// Optimizer budget for the small models the checks train.
#[derive(Debug, Clone, PartialEq)]
pub struct Budget {
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
}

impl Budget {
    /// Cosine decay to zero over the budget.
    fn lr_at(&self, step: usize) -> f64 {
        0.5 * self.lr * (1.0 + (PI * step as f64 / self.steps as f64).cos())
    }

    fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.batch == 0 || !(self.lr > 0.0) {
            return Err(Error::Config(format!("training budget {self:?} must be positive")));
        }
        Ok(())
    }
}

fn fresh_opt(lr: f64, params: &ParamStore) -> AdamW {
    let mut opt = AdamW::new(lr, params);
    opt.weight_decay = 0.0;
    opt.max_grad_norm = None;
    opt
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi + xs.iter().map(|x| (x - hi).exp()).sum::<f64>().ln()
}

// ---------------------------------------------------------------------------
// Density ratio

#[derive(Debug, Clone, PartialEq)]
pub struct RatioReport {
    /// Largest `|logit − c − log(π_T/π_θ)|` over the retained grid points.
    pub max_abs_error: f64,
    /// The additive constant `c = log E_{π_θ}[exp(logit)]`.
    pub gauge: f64,
    pub points: usize,
    pub worst: f64,
}

fn scalar_video(x: f64, source: Source) -> Video {
    Video::new(Mat::from_elem((1, 1), x), 0, source).expect("1x1 video")
}

/// Discriminator shape for one-dimensional, single-prompt ratio cases.
pub fn scalar_disc_geometry() -> DiscGeometry {
    DiscGeometry {
        blocks: 1,
        dim: 1,
        prompts: 1,
        enc_width: 8,
        prompt_width: 1,
        hidden: 32,
        layers: 2,
    }
}

/// Train a discriminator with the pairwise loss on prompt-0 samples from two
/// samplers; the second sampler's draws are relabelled as student videos.
pub fn train_pairwise_discriminator(
    teacher: &TeacherHandle,
    student: &TeacherHandle,
    geom: &DiscGeometry,
    budget: &Budget,
    seed: u64,
) -> Result<(Discriminator, ParamStore)> {
    budget.validate()?;
    let (disc, mut params) = Discriminator::init(geom, &mut stream(seed, &[label("ratio-init")]))?;
    let mut opt = fresh_opt(budget.lr, &params);
    for step in 0..budget.steps {
        let mut rng = stream(seed, &[label("ratio-batch"), step as u64]);
        let mut xt = Vec::with_capacity(budget.batch);
        let mut xs = Vec::with_capacity(budget.batch);
        for _ in 0..budget.batch {
            xt.push(teacher.sample(0, &mut rng)?);
            let mut s = student.sample(0, &mut rng)?;
            s.source = Source::Student;
            xs.push(s);
        }
        opt.lr = budget.lr_at(step);
        disc_step(&disc, &mut params, &mut opt, DiscLoss::Bt, &xt, &xs)?;
    }
    Ok((disc, params))
}

/// Compare a trained logit against the closed-form log ratio on the grid
/// points where both densities exceed `1e-3`. The logit's free additive
/// constant is fixed by `E_{π_θ}[exp(logit − c)] = 1`, estimated on
/// `gauge_samples` draws from the student.
pub fn verify_ratio_recovery(
    teacher: &TeacherHandle,
    student: &TeacherHandle,
    disc: &Discriminator,
    params: &ParamStore,
    grid: &[f64],
    gauge_samples: usize,
    rng: &mut Rng,
) -> Result<RatioReport> {
    if !teacher.has_oracle() || !student.has_oracle() {
        return Err(Error::Capability("ratio recovery needs analytic densities on both sides".into()));
    }
    if gauge_samples == 0 {
        return Err(Error::Config("ratio recovery: need gauge samples".into()));
    }
    let draws: Vec<Video> = (0..gauge_samples)
        .map(|_| student.sample(0, rng).map(|mut v| {
            v.source = Source::Student;
            v
        }))
        .collect::<Result<_>>()?;
    let scores = disc.scores(params, &draws)?;
    let gauge = log_sum_exp(&scores) - (gauge_samples as f64).ln();

    let mut kept = Vec::new();
    for &x in grid {
        let v = scalar_video(x, Source::Teacher);
        let lt = oracle_log_density(teacher, &v)?;
        let ls = oracle_log_density(student, &v)?;
        if lt.exp() > 1e-3 && ls.exp() > 1e-3 {
            kept.push((x, lt - ls));
        }
    }
    if kept.is_empty() {
        return Err(Error::Input("ratio recovery: no grid point in the high-density region".into()));
    }
    let videos: Vec<Video> = kept.iter().map(|(x, _)| scalar_video(*x, Source::Student)).collect();
    let logits = disc.scores(params, &videos)?;
    let (mut max_abs_error, mut worst) = (0.0f64, kept[0].0);
    for ((x, truth), l) in kept.iter().zip(&logits) {
        let e = (l - gauge - truth).abs();
        if e > max_abs_error {
            max_abs_error = e;
            worst = *x;
        }
    }
    Ok(RatioReport {
        max_abs_error,
        gauge,
        points: kept.len(),
        worst,
    })
}

/// Train on a bundled case and check it.
pub fn run_ratio_case(case: &RatioCase, budget: &Budget, seed: u64) -> Result<RatioReport> {
    let teacher = TeacherHandle::mixture(case.teacher.config())?;
    let student = TeacherHandle::mixture(case.student.config())?;
    let (disc, params) = train_pairwise_discriminator(&teacher, &student, &scalar_disc_geometry(), budget, seed)?;
    verify_ratio_recovery(
        &teacher,
        &student,
        &disc,
        &params,
        &case.grid(),
        20_000,
        &mut stream(seed, &[label("ratio-gauge")]),
    )
}

// ---------------------------------------------------------------------------
// Tilted law

/// `r·π / Σ r·π`
pub fn normalized_tilt(student: &[f64], reward: &[f64]) -> Vec<f64> {
    let raw: Vec<f64> = student.iter().zip(reward).map(|(p, r)| p * r).collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / z).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TiltReport {
    /// `max |tilt − π_T|` with the exact ratio as reward.
    pub exact_max_error: f64,
    /// TV between the tilt under `exp(logit)` and `π_T`, when logits are given.
    pub trained_tv: Option<f64>,
}

pub fn verify_tilted_law(toy: &DiscreteToy, trained_logits: Option<&[f64]>) -> Result<TiltReport> {
    let exact: Vec<f64> = toy.teacher.iter().zip(&toy.student).map(|(t, s)| t / s).collect();
    let tilt = normalized_tilt(&toy.student, &exact);
    let exact_max_error = tilt.iter().zip(&toy.teacher).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let trained_tv = match trained_logits {
        None => None,
        Some(l) if l.len() != toy.outcomes() => {
            return Err(Error::Input(format!("{} logits for {} outcomes", l.len(), toy.outcomes())));
        }
        Some(l) => {
            // shift before exponentiating; the tilt is invariant to it
            let hi = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let r: Vec<f64> = l.iter().map(|x| (x - hi).exp()).collect();
            Some(total_variation(&normalized_tilt(&toy.student, &r), &toy.teacher))
        }
    };
    Ok(TiltReport {
        exact_max_error,
        trained_tv,
    })
}

fn categorical(p: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, x) in p.iter().enumerate() {
        acc += x;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

fn one_hot_video(outcome: usize, n: usize, source: Source) -> Video {
    let mut m = Mat::zeros((1, n));
    m[[0, outcome]] = 1.0;
    Video::new(m, 0, source).expect("one-hot video")
}

/// Train the library discriminator on one-hot outcome samples from both
/// tables and return its logit for every outcome.
pub fn train_outcome_logits(toy: &DiscreteToy, budget: &Budget, seed: u64) -> Result<Vec<f64>> {
    budget.validate()?;
    let n = toy.outcomes();
    let geom = DiscGeometry {
        blocks: 1,
        dim: n,
        prompts: 1,
        enc_width: 8,
        prompt_width: 1,
        hidden: 32,
        layers: 1,
    };
    let (disc, mut params) = Discriminator::init(&geom, &mut stream(seed, &[label("tilt-init")]))?;
    let mut opt = fresh_opt(budget.lr, &params);
    for step in 0..budget.steps {
        let mut rng = stream(seed, &[label("tilt-batch"), step as u64]);
        let mut xt = Vec::with_capacity(budget.batch);
        let mut xs = Vec::with_capacity(budget.batch);
        for _ in 0..budget.batch {
            xt.push(one_hot_video(categorical(&toy.teacher, &mut rng), n, Source::Teacher));
            xs.push(one_hot_video(categorical(&toy.student, &mut rng), n, Source::Student));
        }
        opt.lr = budget.lr_at(step);
        disc_step(&disc, &mut params, &mut opt, DiscLoss::Bt, &xt, &xs)?;
    }
    let all: Vec<Video> = (0..n).map(|i| one_hot_video(i, n, Source::Student)).collect();
    disc.scores(&params, &all)
}

// ---------------------------------------------------------------------------
// Conditional velocity

/// `v⁺(x_t, t)` by enumeration: posterior over support points under the
/// Gaussian forward kernel with prior `π_θ·r`, averaging each point's
/// forward velocity `α̇ x_0 + σ̇ ε`, `ε = (x_t − α x_0)/σ`.
pub fn tilted_velocity(
    support: &[[f64; 2]],
    student: &[f64],
    tilt: &[f64],
    sched: Schedule,
    x: [f64; 2],
    t: f64,
) -> [f64; 2] {
    let (a, s) = (sched.alpha(t), sched.sigma(t));
    let (ad, sd) = (sched.alpha_dot(t), sched.sigma_dot(t));
    let logs: Vec<f64> = support
        .iter()
        .zip(student.iter().zip(tilt))
        .map(|(x0, (p, r))| {
            let q = (x[0] - a * x0[0]).powi(2) + (x[1] - a * x0[1]).powi(2);
            (p * r).ln() - q / (2.0 * s * s)
        })
        .collect();
    let z = log_sum_exp(&logs);
    let mut v = [0.0; 2];
    for (x0, l) in support.iter().zip(&logs) {
        let post = (l - z).exp();
        for c in 0..2 {
            let eps = (x[c] - a * x0[c]) / s;
            v[c] += post * (ad * x0[c] + sd * eps);
        }
    }
    v
}

/// A 2-D velocity MLP on `[x, time features]`.
pub struct PlaneField {
    mlp: Mlp,
    time_embed: usize,
}

impl FlowField for PlaneField {
    type Ctx = ();

    fn velocity(&self, tape: &mut Tape, params: &Bound, x_t: Var, t: &[f64], _: &()) -> Result<Var> {
        let temb = tape.constant(time_embedding(t, self.time_embed))?;
        let input = tape.concat(&[x_t, temb])?;
        self.mlp.forward(tape, params, input)
    }
}

impl PlaneField {
    pub fn init(hidden: usize, layers: usize, rng: &mut Rng) -> Result<(Self, ParamStore)> {
        let time_embed = 16;
        let mut sizes = vec![2 + time_embed];
        sizes.extend(std::iter::repeat_n(hidden, layers));
        sizes.push(2);
        let mut store = ParamStore::new();
        let mlp = Mlp::init(&mut store, "plane", &sizes, Activation::Silu, rng)?;
        Ok((Self { mlp, time_embed }, store))
    }

    pub fn eval(&self, params: &ParamStore, x: [f64; 2], t: f64) -> Result<[f64; 2]> {
        let mut tape = Tape::new();
        let b = tape.bind_frozen(params)?;
        let xv = tape.constant(Mat::from_shape_vec((1, 2), x.to_vec()).expect("row"))?;
        let v = self.velocity(&mut tape, &b, xv, &[t], &())?;
        let m = tape.value(v);
        Ok([m[[0, 0]], m[[0, 1]]])
    }
}

/// Train a [`PlaneField`] with the signed regression on rollouts drawn from
/// `π_θ`, weighting support point `j` by `w_j = (1 + r_j / max r)/2` so that
/// `2w − 1` is proportional to its reward. Times are drawn from
/// `[min grid t − 0.1, 1)`.
pub fn train_tilted_field(
    toy: &VelocityToy,
    sched: Schedule,
    beta: f64,
    budget: &Budget,
    seed: u64,
) -> Result<(PlaneField, ParamStore)> {
    toy.validate()?;
    budget.validate()?;
    let (field, mut params) = PlaneField::init(64, 2, &mut stream(seed, &[label("plane-init")]))?;
    let r_max = toy.tilt.iter().copied().fold(0.0, f64::max);
    let w: Vec<f64> = toy.tilt.iter().map(|r| 0.5 * (1.0 + r / r_max)).collect();
    let t_lo = (toy.times.iter().copied().fold(1.0, f64::min) - 0.1).max(0.01);
    let mut opt = fresh_opt(budget.lr, &params);
    for step in 0..budget.steps {
        let mut rng = stream(seed, &[label("plane-batch"), step as u64]);
        let idx: Vec<usize> = (0..budget.batch).map(|_| categorical(&toy.student, &mut rng)).collect();
        let x0 = Mat::from_shape_fn((budget.batch, 2), |(i, c)| toy.support[idx[i]][c]);
        let t: Vec<f64> = (0..budget.batch).map(|_| rng.random_range(t_lo..1.0)).collect();
        let eps = normal_matrix(budget.batch, 2, &mut rng);
        let batch = FlowBatch::new(x0, t, eps, sched, ())?;
        let weights: Vec<f64> = idx.iter().map(|&j| w[j]).collect();

        let mut tape = Tape::new();
        let b = tape.bind(&params)?;
        let x_t = tape.constant(batch.x_t.clone())?;
        let v = field.velocity(&mut tape, &b, x_t, &batch.t, &())?;
        let loss = nft_loss(&mut tape, v, &batch.target, &weights, beta)?;
        let grads = b.collect(&tape.backward(loss)?);
        opt.lr = budget.lr_at(step);
        opt.step(&mut params, &grads)?;
    }
    Ok((field, params))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityReport {
    /// Largest Euclidean gap between the field and `v⁺` on the grid.
    pub max_error: f64,
    pub mean_error: f64,
    pub worst: ([f64; 2], f64),
}

/// Compare any velocity function against the enumerated `v⁺` on the toy's
/// grid.
pub fn verify_conditional_velocity(
    toy: &VelocityToy,
    sched: Schedule,
    mut field: impl FnMut([f64; 2], f64) -> Result<[f64; 2]>,
) -> Result<VelocityReport> {
    toy.validate()?;
    let grid = toy.grid();
    let mut report = VelocityReport {
        max_error: 0.0,
        mean_error: 0.0,
        worst: grid[0],
    };
    for &(x, t) in &grid {
        let exact = tilted_velocity(&toy.support, &toy.student, &toy.tilt, sched, x, t);
        let got = field(x, t)?;
        let e = ((got[0] - exact[0]).powi(2) + (got[1] - exact[1]).powi(2)).sqrt();
        report.mean_error += e / grid.len() as f64;
        if e > report.max_error {
            report.max_error = e;
            report.worst = (x, t);
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Reverse KL

fn kl(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).filter(|(x, _)| **x > 0.0).map(|(x, y)| x * (x / y).ln()).sum()
}

/// `E_π[ρ] − KL(π ‖ π_old)`
pub fn reward_objective(pi: &[f64], log_reward: &[f64], pi_old: &[f64]) -> f64 {
    pi.iter().zip(log_reward).map(|(p, r)| p * r).sum::<f64>() - kl(pi, pi_old)
}

/// Exponentiated-gradient ascent of [`reward_objective`] over the simplex,
/// from the uniform law. Each iteration is
/// `log π ← (1 − η) log π + η (log π_old + ρ) + const`.
pub fn maximize_reward_objective(log_reward: &[f64], pi_old: &[f64], eta: f64, iters: usize) -> Vec<f64> {
    let n = pi_old.len();
    let mut logp = vec![-(n as f64).ln(); n];
    for _ in 0..iters {
        for i in 0..n {
            logp[i] = (1.0 - eta) * logp[i] + eta * (pi_old[i].ln() + log_reward[i]);
        }
        let z = log_sum_exp(&logp);
        logp.iter_mut().for_each(|l| *l -= z);
    }
    logp.into_iter().map(f64::exp).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReverseKlReport {
    /// Spread of `J(π) + KL(π‖π_T)` over random laws; zero when the two
    /// differ by a constant.
    pub constant_spread: f64,
    pub argmax_tv: f64,
    /// TV between the maximizers of `J` and `J + c` for a constant shift of
    /// the reward.
    pub shift_tv: f64,
    /// Random laws whose objective beats the maximizer.
    pub beaten_by: usize,
    pub objective_at_max: f64,
}

pub fn verify_reverse_kl(toy: &DiscreteToy, probes: usize, rng: &mut Rng) -> ReverseKlReport {
    let rho = toy.log_ratio();
    let n = toy.outcomes();
    let probe_laws: Vec<Vec<f64>> = (0..probes)
        .map(|_| {
            // Dirichlet(1) by normalized exponentials
            let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|x| x / s).collect()
        })
        .collect();
    let gaps: Vec<f64> = probe_laws
        .iter()
        .map(|p| reward_objective(p, &rho, &toy.student) + kl(p, &toy.teacher))
        .collect();
    let lo = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let best = maximize_reward_objective(&rho, &toy.student, 0.5, 200);
    let shift = 1.0 + normal(rng).abs();
    let shifted: Vec<f64> = rho.iter().map(|r| r + shift).collect();
    let best_shifted = maximize_reward_objective(&shifted, &toy.student, 0.5, 200);
    let objective_at_max = reward_objective(&best, &rho, &toy.student);
    let beaten_by = probe_laws
        .iter()
        .filter(|p| reward_objective(p, &rho, &toy.student) > objective_at_max + 1e-12)
        .count();
    ReverseKlReport {
        constant_spread: if probes == 0 { 0.0 } else { hi - lo },
        argmax_tv: total_variation(&best, &toy.teacher),
        shift_tv: total_variation(&best, &best_shifted),
        beaten_by,
        objective_at_max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::toys::{discrete_toys, velocity_toys};
    use crate::teacher::{MixtureConfig, OscillatorConfig};
    use proptest::prelude::*;

    fn toy(name: &str) -> DiscreteToy {
        discrete_toys().into_iter().find(|t| t.name == name).unwrap()
    }

    #[test]
    fn exact_tilt_of_uniform_student_is_teacher() {
        let r = verify_tilted_law(&toy("uniform_student"), None).unwrap();
        assert!(r.exact_max_error < 1e-15, "{}", r.exact_max_error);
    }

    #[test]
    fn unit_reward_on_matched_tables_leaves_student() {
        let t = toy("matched");
        let tilt = normalized_tilt(&t.student, &[1.0; 8]);
        assert!(total_variation(&tilt, &t.student) < 1e-15);
        let r = verify_tilted_law(&t, Some(&[0.3; 8])).unwrap();
        assert!(r.trained_tv.unwrap() < 1e-15);
    }

    #[test]
    fn tilt_rejects_wrong_logit_count() {
        assert!(matches!(verify_tilted_law(&toy("random_a"), Some(&[0.0; 3])), Err(Error::Input(_))));
    }

    proptest! {
        #[test]
        fn tilt_ignores_reward_scale(seed in 0u64..200, c in -5.0f64..5.0) {
            let t = toy("random_b");
            let mut rng = stream(seed, &[]);
            let l: Vec<f64> = (0..8).map(|_| normal(&mut rng)).collect();
            let shifted: Vec<f64> = l.iter().map(|x| x + c).collect();
            let a = verify_tilted_law(&t, Some(&l)).unwrap().trained_tv.unwrap();
            let b = verify_tilted_law(&t, Some(&shifted)).unwrap().trained_tv.unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn reward_objective_is_reverse_kl(seed in 0u64..200) {
            for t in discrete_toys() {
                let r = verify_reverse_kl(&t, 16, &mut stream(seed, &[]));
                prop_assert!(r.constant_spread < 1e-12, "{}", r.constant_spread);
                prop_assert_eq!(r.beaten_by, 0);
            }
        }
    }

    #[test]
    fn maximizer_is_teacher() {
        for t in discrete_toys() {
            let r = verify_reverse_kl(&t, 100, &mut stream(4, &[]));
            assert!(r.argmax_tv < 1e-12, "{}: {}", t.name, r.argmax_tv);
            assert!(r.shift_tv < 1e-12);
            // at π = π_T the objective is −KL(π_T‖π_T) = 0
            assert!(r.objective_at_max.abs() < 1e-12);
        }
    }

    #[test]
    fn single_point_support_gives_affine_velocity() {
        let sched = Schedule::RectifiedFlow;
        let x0 = [0.7, -0.4];
        let (x, t) = ([0.1, 0.5], 0.6);
        let v = tilted_velocity(&[x0], &[1.0], &[3.0], sched, x, t);
        for c in 0..2 {
            let eps = (x[c] - sched.alpha(t) * x0[c]) / sched.sigma(t);
            let want = sched.alpha_dot(t) * x0[c] + sched.sigma_dot(t) * eps;
            assert!((v[c] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn symmetric_pair_has_no_velocity_along_separation_at_midpoint() {
        for sched in [Schedule::RectifiedFlow, Schedule::Trigonometric] {
            for t in [0.2, 0.5, 0.9] {
                let v = tilted_velocity(&[[-1.0, 2.0], [1.0, 2.0]], &[0.5, 0.5], &[1.0, 1.0], sched, [0.0, 0.3], t);
                assert!(v[0].abs() < 1e-14, "{v:?}");
            }
        }
    }

    #[test]
    fn skewed_pair_by_hand() {
        // Rectified path at t = 0.5: α = σ = 0.5, α̇ = −1, σ̇ = 1. At x = 0 the
        // kernel is symmetric, so the posterior is the prior tilt (0.9, 0.1).
        // Point j contributes −x0 + (0 − 0.5 x0)/0.5 = −2 x0.
        let v = tilted_velocity(
            &[[-1.0, 0.0], [1.0, 0.0]],
            &[0.5, 0.5],
            &[0.9, 0.1],
            Schedule::RectifiedFlow,
            [0.0, 0.0],
            0.5,
        );
        assert!((v[0] - (0.9 * 2.0 - 0.1 * 2.0)).abs() < 1e-14, "{v:?}");
        assert!(v[1].abs() < 1e-15);
    }

    #[test]
    fn exact_velocity_function_passes_its_own_check() {
        let toy = &velocity_toys()[1];
        let r = verify_conditional_velocity(toy, Schedule::RectifiedFlow, |x, t| {
            Ok(tilted_velocity(&toy.support, &toy.student, &toy.tilt, Schedule::RectifiedFlow, x, t))
        })
        .unwrap();
        assert_eq!(r.max_error, 0.0);
    }

    #[test]
    fn sampling_only_teacher_is_a_capability_error() {
        let g = Discriminator::init(&scalar_disc_geometry(), &mut stream(0, &[])).unwrap();
        let shifted = TeacherHandle::shifted(OscillatorConfig::default(), &Default::default()).unwrap();
        let m = TeacherHandle::mixture(MixtureConfig {
            blocks: 1,
            dim: 1,
            means: vec![[vec![0.0], vec![0.0]]],
            weights: vec![[0.5, 0.5]],
            std: 1.0,
        })
        .unwrap();
        let r = verify_ratio_recovery(&shifted, &m, &g.0, &g.1, &[0.0], 10, &mut stream(0, &[]));
        assert!(matches!(r, Err(Error::Capability(_))));
    }

    #[test]
    fn shifted_gaussian_grid_is_all_high_density() {
        let case = &crate::eval::toys::ratio_cases()[0];
        let teacher = TeacherHandle::mixture(case.teacher.config()).unwrap();
        let grid = case.grid();
        let mut kept = 0;
        for x in grid {
            let v = scalar_video(x, Source::Teacher);
            if oracle_log_density(&teacher, &v).unwrap().exp() > 1e-3 {
                kept += 1;
            }
        }
        assert_eq!(kept, case.points);
    }
}
