//! The verification suite: algebraic identities of the signed operators,
//! finite-difference checks of every trainable loss, and the oracle checks.

use serde::{Deserialize, Serialize};

use crate::autodiff::{analytic_grad, compare, finite_difference, Bound, Mat, ParamStore, Tape, Var};
use crate::baselines::{dmd_scaffold_loss, gan_generator_loss, sft_loss};
use crate::discriminator::{bt_loss, gan_loss, DiscGeometry, Discriminator};
use crate::error::{Error, Result};
use crate::eval::oracles::{
    run_ratio_case, train_outcome_logits, train_tilted_field, verify_conditional_velocity, verify_reverse_kl,
    verify_tilted_law, Budget,
};
use crate::eval::toys::{discrete_toys, ratio_cases, velocity_toys};
use crate::flowpath::{fm_loss, row_sq_error, FlowBatch, FlowField, Schedule};
use crate::objective::{afd_loss, nft_loss, nft_loss_from, prior_loss, v_minus, v_plus, AfdConfig};
use crate::rng::{label, normal_matrix, stream, Rng};
use crate::student::{Source, StudentCtx, StudentField, StudentGeometry, Video};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Algebra,
    Gradients,
    Ratio,
    Tilt,
    Velocity,
    ReverseKl,
    All,
}

impl Suite {
    pub const EACH: [Suite; 6] = [
        Suite::Algebra,
        Suite::Gradients,
        Suite::Ratio,
        Suite::Tilt,
        Suite::Velocity,
        Suite::ReverseKl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Algebra => "algebra",
            Suite::Gradients => "gradients",
            Suite::Ratio => "ratio",
            Suite::Tilt => "tilt",
            Suite::Velocity => "velocity",
            Suite::ReverseKl => "reverse-kl",
            Suite::All => "all",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        Suite::EACH
            .into_iter()
            .chain([Suite::All])
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Suite::EACH.iter().map(|x| x.name()).collect();
                Error::Config(format!("unknown suite `{s}`; expected all or one of {}", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Roundoff allowance for exact identities.
    pub identity: f64,
    pub neutrality: f64,
    pub gradient: f64,
    pub tilt_tv: f64,
    pub velocity: f64,
    pub reverse_kl: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            identity: 1e-12,
            neutrality: 1e-12,
            gradient: 1e-4,
            tilt_tv: 0.05,
            velocity: 0.05,
            reverse_kl: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetSection {
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
}

impl BudgetSection {
    fn budget(&self) -> Budget {
        Budget {
            steps: self.steps,
            batch: self.batch,
            lr: self.lr,
        }
    }
}

impl Default for BudgetSection {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch: 512,
            lr: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySettings {
    pub seed: u64,
    pub beta: f64,
    pub tolerances: Tolerances,
    pub ratio: BudgetSection,
    pub tilt: BudgetSection,
    pub velocity: BudgetSection,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            seed: 7,
            beta: 0.1,
            tolerances: Tolerances::default(),
            ratio: BudgetSection::default(),
            tilt: BudgetSection::default(),
            velocity: BudgetSection {
                steps: 15_000,
                batch: 1024,
                lr: 3e-3,
            },
        }
    }
}

impl VerifySettings {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        for (name, v) in [
            ("identity", t.identity),
            ("neutrality", t.neutrality),
            ("gradient", t.gradient),
            ("tilt_tv", t.tilt_tv),
            ("velocity", t.velocity),
            ("reverse_kl", t.reverse_kl),
        ] {
            if !(v >= 0.0) {
                return Err(Error::Config(format!("tolerances.{name} must be non-negative, got {v}")));
            }
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!("beta must lie in (0, 1], got {}", self.beta)));
        }
        for (name, b) in [("ratio", &self.ratio), ("tilt", &self.tilt), ("velocity", &self.velocity)] {
            if b.steps == 0 || b.batch == 0 || !(b.lr > 0.0) {
                return Err(Error::Config(format!("{name}: steps, batch and lr must be positive")));
            }
        }
        Ok(())
    }
}

/// One verified quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub observed: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `observed <= tolerance`.
    pub fn at_most(suite: Suite, name: impl Into<String>, observed: f64, tolerance: f64) -> Self {
        Self {
            suite: suite.name(),
            name: name.into(),
            observed,
            tolerance,
            passed: observed <= tolerance,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "[{}] {}/{}: observed {:.3e}, tolerance {:.3e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.observed,
            self.tolerance
        )
    }
}

pub fn run(suite: Suite, settings: &VerifySettings) -> Result<Vec<Check>> {
    settings.validate()?;
    match suite {
        Suite::All => {
            let mut out = Vec::new();
            for s in Suite::EACH {
                out.extend(run(s, settings)?);
            }
            Ok(out)
        }
        Suite::Algebra => algebra(settings),
        Suite::Gradients => gradients(settings),
        Suite::Ratio => ratio(settings),
        Suite::Tilt => tilt(settings),
        Suite::Velocity => velocity(settings),
        Suite::ReverseKl => reverse_kl(settings),
    }
}

// ---------------------------------------------------------------------------
// Shared small fixture

struct Fixture {
    field: StudentField,
    theta: ParamStore,
    disc: Discriminator,
    phi: ParamStore,
    teacher: Vec<Video>,
    student: Vec<Video>,
    batch: FlowBatch<StudentCtx>,
    weights: Vec<f64>,
    v_ref: Mat,
}

fn random_videos(n: usize, prompts: usize, source: Source, rng: &mut Rng) -> Vec<Video> {
    (0..n)
        .map(|i| Video::new(normal_matrix(3, 2, rng), i % prompts, source).expect("video"))
        .collect()
}

fn fixture(seed: u64) -> Result<Fixture> {
    let sg = StudentGeometry {
        blocks: 3,
        dim: 2,
        prompts: 2,
        hidden: 8,
        layers: 1,
        time_embed: 4,
        enc_width: 3,
        prompt_width: 2,
    };
    let dg = DiscGeometry {
        blocks: 3,
        dim: 2,
        prompts: 2,
        enc_width: 3,
        prompt_width: 2,
        hidden: 5,
        layers: 1,
    };
    let (field, theta) = StudentField::init(&sg, &mut stream(seed, &[label("fixture-student")]))?;
    let (disc, phi) = Discriminator::init(&dg, &mut stream(seed, &[label("fixture-disc")]))?;
    let mut rng = stream(seed, &[label("fixture-data")]);
    let teacher = random_videos(4, 2, Source::Teacher, &mut rng);
    let student = random_videos(4, 2, Source::Student, &mut rng);
    let batch = StudentField::noised_states(&student, Schedule::RectifiedFlow, &mut rng)?;
    let weights: Vec<f64> = (0..batch.len()).map(|i| (i as f64 * 0.37).fract()).collect();
    let v_ref = normal_matrix(batch.len(), 2, &mut rng);
    Ok(Fixture {
        field,
        theta,
        disc,
        phi,
        teacher,
        student,
        batch,
        weights,
        v_ref,
    })
}

fn prediction(fx: &Fixture, tape: &mut Tape, b: &Bound) -> Result<Var> {
    let x = tape.constant(fx.batch.x_t.clone())?;
    fx.field.velocity(tape, b, x, &fx.batch.t, &fx.batch.ctx)
}

fn frozen_prediction(fx: &Fixture) -> Result<Mat> {
    let mut tape = Tape::new();
    let b = tape.bind_frozen(&fx.theta)?;
    let v = prediction(fx, &mut tape, &b)?;
    Ok(tape.value(v).clone())
}

fn max_abs(a: &Mat, b: &Mat) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn grads_of(fx: &Fixture, f: impl Fn(&mut Tape, Var) -> Result<Var>) -> Result<Vec<Mat>> {
    let mut tape = Tape::new();
    let b = tape.bind(&fx.theta)?;
    let v = prediction(fx, &mut tape, &b)?;
    let l = f(&mut tape, v)?;
    Ok(b.collect(&tape.backward(l)?))
}

/// `max |a − c·b| / max |b|` over all parameter arrays.
fn scaled_gap(a: &[Mat], b: &[Mat], c: f64) -> f64 {
    let scale = b.iter().flat_map(|g| g.iter()).fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - c * q).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
        / scale
}

fn algebra(s: &VerifySettings) -> Result<Vec<Check>> {
    let fx = fixture(s.seed)?;
    let tol = s.tolerances.identity;
    let beta = s.beta;
    let mut out = Vec::new();

    let mut tape = Tape::new();
    let b = tape.bind(&fx.theta)?;
    let v = prediction(&fx, &mut tape, &b)?;
    let vp = v_plus(&mut tape, v, beta)?;
    let vm = v_minus(&mut tape, v, beta)?;
    let base = tape.value(v).clone();
    out.push(Check::at_most(Suite::Algebra, "plus value equals prediction", max_abs(tape.value(vp), &base), tol));
    out.push(Check::at_most(Suite::Algebra, "minus value equals prediction", max_abs(tape.value(vm), &base), tol));

    let target = fx.batch.target.clone();
    let sq = |op: fn(&mut Tape, Var, f64) -> Result<Var>| {
        let target = target.clone();
        move |tape: &mut Tape, v: Var| -> Result<Var> {
            let w = op(tape, v, beta)?;
            let y = tape.constant(target.clone())?;
            let e = row_sq_error(tape, w, y)?;
            tape.mean(e)
        }
    };
    fn identity(_: &mut Tape, v: Var, _: f64) -> Result<Var> {
        Ok(v)
    }
    let g0 = grads_of(&fx, sq(identity))?;
    let gp = grads_of(&fx, sq(v_plus))?;
    let gm = grads_of(&fx, sq(v_minus))?;
    out.push(Check::at_most(Suite::Algebra, "plus gradient is beta times regression gradient", scaled_gap(&gp, &g0, beta), tol));
    out.push(Check::at_most(Suite::Algebra, "minus gradient is -beta times regression gradient", scaled_gap(&gm, &g0, -beta), tol));

    let half = vec![0.5; fx.batch.len()];
    let gh = grads_of(&fx, |tape, v| nft_loss(tape, v, &fx.batch.target, &half, beta))?;
    let norm = gh.iter().flat_map(|g| g.iter()).map(|x| x * x).sum::<f64>().sqrt();
    out.push(Check::at_most(Suite::Algebra, "half weights give zero gradient", norm, s.tolerances.neutrality));

    // w = 1 and w = 0 reduce to ±β-scaled regression
    let ones = vec![1.0; fx.batch.len()];
    let zeros = vec![0.0; fx.batch.len()];
    let g1 = grads_of(&fx, |tape, v| nft_loss(tape, v, &fx.batch.target, &ones, beta))?;
    let gz = grads_of(&fx, |tape, v| nft_loss(tape, v, &fx.batch.target, &zeros, beta))?;
    out.push(Check::at_most(Suite::Algebra, "unit weights attract", scaled_gap(&g1, &g0, beta), tol));
    out.push(Check::at_most(Suite::Algebra, "zero weights repel", scaled_gap(&gz, &g0, -beta), tol));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Gradients

const FD_STEP: f64 = 1e-5;
const FD_PICKS: Option<usize> = Some(6);

fn fd_check<F>(store: &ParamStore, tol: f64, f: F) -> Result<f64>
where
    F: Fn(&mut Tape, &Bound) -> Result<Var>,
{
    let (_, analytic) = analytic_grad(&f, store)?;
    let numeric = finite_difference(
        |p| {
            let mut tape = Tape::new();
            let b = tape.bind(p)?;
            let l = f(&mut tape, &b)?;
            Ok(tape.scalar(l))
        },
        store,
        FD_STEP,
        FD_PICKS,
    )?;
    Ok(compare(store, &analytic, &numeric, tol).max_rel_error)
}

/// A stop-gradient loss checked against differences of its sg-aware form:
/// the same expression with the stopped branch frozen at the base value.
fn fd_check_frozen<F, G>(store: &ParamStore, tol: f64, live: F, frozen: G) -> Result<f64>
where
    F: Fn(&mut Tape, &Bound) -> Result<Var>,
    G: Fn(&mut Tape, &Bound) -> Result<Var>,
{
    let (_, analytic) = analytic_grad(&live, store)?;
    let numeric = finite_difference(
        |p| {
            let mut tape = Tape::new();
            let b = tape.bind(p)?;
            let l = frozen(&mut tape, &b)?;
            Ok(tape.scalar(l))
        },
        store,
        FD_STEP,
        FD_PICKS,
    )?;
    Ok(compare(store, &analytic, &numeric, tol).max_rel_error)
}

fn gradients(s: &VerifySettings) -> Result<Vec<Check>> {
    let fx = fixture(s.seed)?;
    let tol = s.tolerances.gradient;
    let cfg = AfdConfig {
        beta: s.beta,
        ..AfdConfig::default()
    };
    let anchor = frozen_prediction(&fx)?;
    let mut out = Vec::new();
    let mut push = |name: &str, e: f64| out.push(Check::at_most(Suite::Gradients, name, e, tol));

    push("bt", fd_check(&fx.phi, tol, |t, b| bt_loss(t, b, &fx.disc, &fx.teacher, &fx.student))?);
    push("gan discriminator", fd_check(&fx.phi, tol, |t, b| gan_loss(t, b, &fx.disc, &fx.teacher, &fx.student))?);
    push("fm", fd_check(&fx.theta, tol, |t, b| fm_loss(t, b, &fx.field, &fx.batch))?);
    push(
        "nft",
        fd_check_frozen(
            &fx.theta,
            tol,
            |t, b| {
                let v = prediction(&fx, t, b)?;
                nft_loss(t, v, &fx.batch.target, &fx.weights, s.beta)
            },
            |t, b| {
                let v = prediction(&fx, t, b)?;
                nft_loss_from(t, v, Some(&anchor), &fx.batch.target, &fx.weights, s.beta)
            },
        )?,
    );
    push(
        "nft anchored",
        fd_check(&fx.theta, tol, |t, b| {
            let v = prediction(&fx, t, b)?;
            nft_loss_from(t, v, Some(&fx.v_ref), &fx.batch.target, &fx.weights, s.beta)
        })?,
    );
    push(
        "prior",
        fd_check(&fx.theta, tol, |t, b| {
            let v = prediction(&fx, t, b)?;
            prior_loss(t, v, &fx.v_ref, &fx.weights)
        })?,
    );
    push(
        "afd",
        fd_check_frozen(
            &fx.theta,
            tol,
            |t, b| Ok(afd_loss(t, b, &fx.field, &fx.batch, &fx.v_ref, None, &fx.weights, &cfg)?.total),
            |t, b| Ok(afd_loss(t, b, &fx.field, &fx.batch, &fx.v_ref, Some(&anchor), &fx.weights, &cfg)?.total),
        )?,
    );
    push(
        "sft",
        fd_check(&fx.theta, tol, |t, b| {
            sft_loss(t, b, &fx.field, &fx.teacher, Schedule::RectifiedFlow, &mut stream(s.seed, &[label("fd-sft")]))
        })?,
    );
    push(
        "gan generator",
        fd_check(&fx.theta, tol, |t, b| {
            let phi = t.bind_frozen(&fx.phi)?;
            let mut rngs: Vec<Rng> = (0..2).map(|i| stream(s.seed, &[label("fd-gen"), i])).collect();
            Ok(gan_generator_loss(t, b, &fx.field, &fx.disc, &phi, &[0, 1], 2, &mut rngs)?.0)
        })?,
    );
    push(
        "dmd scaffold",
        fd_check(&fx.theta, tol, |t, b| dmd_scaffold_loss(t, b, &fx.field, &fx.batch, &fx.weights))?,
    );
    Ok(out)
}

// ---------------------------------------------------------------------------
// Oracle suites

fn ratio(s: &VerifySettings) -> Result<Vec<Check>> {
    ratio_cases()
        .iter()
        .map(|c| {
            let r = run_ratio_case(c, &s.ratio.budget(), s.seed)?;
            Ok(Check::at_most(Suite::Ratio, &c.name, r.max_abs_error, c.tolerance))
        })
        .collect()
}

fn tilt(s: &VerifySettings) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for toy in discrete_toys() {
        let logits = train_outcome_logits(&toy, &s.tilt.budget(), s.seed)?;
        let r = verify_tilted_law(&toy, Some(&logits))?;
        out.push(Check::at_most(
            Suite::Tilt,
            format!("{} exact ratio", toy.name),
            r.exact_max_error,
            s.tolerances.identity,
        ));
        out.push(Check::at_most(
            Suite::Tilt,
            format!("{} trained logit", toy.name),
            r.trained_tv.expect("logits given"),
            s.tolerances.tilt_tv,
        ));
    }
    Ok(out)
}

fn velocity(s: &VerifySettings) -> Result<Vec<Check>> {
    let sched = Schedule::RectifiedFlow;
    velocity_toys()
        .iter()
        .map(|toy| {
            let (field, params) = train_tilted_field(toy, sched, s.beta, &s.velocity.budget(), s.seed)?;
            let r = verify_conditional_velocity(toy, sched, |x, t| field.eval(&params, x, t))?;
            Ok(Check::at_most(Suite::Velocity, &toy.name, r.max_error, s.tolerances.velocity))
        })
        .collect()
}

fn reverse_kl(s: &VerifySettings) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for toy in discrete_toys() {
        let r = verify_reverse_kl(&toy, 1000, &mut stream(s.seed, &[label("reverse-kl")]));
        out.push(Check::at_most(
            Suite::ReverseKl,
            format!("{} objective minus reverse KL is constant", toy.name),
            r.constant_spread,
            s.tolerances.identity,
        ));
        out.push(Check::at_most(
            Suite::ReverseKl,
            format!("{} maximizer", toy.name),
            r.argmax_tv,
            s.tolerances.reverse_kl,
        ));
        out.push(Check::at_most(
            Suite::ReverseKl,
            format!("{} probes beating the maximizer", toy.name),
            r.beaten_by as f64,
            0.0,
        ));
    }
    Ok(out)
}
