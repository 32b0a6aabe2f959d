//! Browser front end for three small experiments. Each one has a plain Rust
//! function (tested natively) and a `wasm_bindgen` wrapper returning flat
//! arrays to the page.

use afd::autodiff::Mat;
use afd::eval::metrics::physics_residual;
use afd::eval::oracles::{normalized_tilt, scalar_disc_geometry, total_variation, train_outcome_logits, train_pairwise_discriminator, Budget};
use afd::eval::toys::{DiscreteToy, Mixture1d};
use afd::rng::stream;
use afd::student::{Source, Video};
use afd::teacher::{OscillatorConfig, PhysicsTeacher, Sampler, TeacherHandle};
use wasm_bindgen::prelude::*;

fn js(e: afd::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Trained logit against `log N(x; shift, 1) − log N(x; 0, 1)` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioCurve {
    pub xs: Vec<f64>,
    pub logit: Vec<f64>,
    pub exact: Vec<f64>,
}

impl RatioCurve {
    pub fn max_gap(&self) -> f64 {
        self.logit.iter().zip(&self.exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

fn gaussian(mean: f64) -> afd::Result<TeacherHandle> {
    TeacherHandle::mixture(
        Mixture1d {
            means: [mean, mean],
            weights: [0.5, 0.5],
            std: 1.0,
        }
        .config(),
    )
}

fn scalar(x: f64) -> Video {
    Video::new(Mat::from_elem((1, 1), x), 0, Source::Student).expect("1x1 video")
}

/// Train a Bradley-Terry discriminator on N(shift, 1) against N(0, 1). The
/// logit is shifted so that `E_student[exp(logit)] = 1`.
pub fn ratio_curve(shift: f64, steps: usize, seed: u64) -> afd::Result<RatioCurve> {
    let teacher = gaussian(shift)?;
    let student = gaussian(0.0)?;
    let budget = Budget {
        steps,
        batch: 256,
        lr: 1e-2,
    };
    let (disc, params) = train_pairwise_discriminator(&teacher, &student, &scalar_disc_geometry(), &budget, seed)?;

    let mut rng = stream(seed, &[1]);
    let draws = (0..4000).map(|_| student.sample(0, &mut rng)).collect::<afd::Result<Vec<_>>>()?;
    let s = disc.scores(&params, &draws)?;
    let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let gauge = hi + (s.iter().map(|x| (x - hi).exp()).sum::<f64>() / s.len() as f64).ln();

    let lo = shift.min(0.0) - 2.0;
    let top = shift.max(0.0) + 2.0;
    let xs: Vec<f64> = (0..=60).map(|i| lo + (top - lo) * i as f64 / 60.0).collect();
    let videos: Vec<Video> = xs.iter().map(|&x| scalar(x)).collect();
    let logit = disc.scores(&params, &videos)?.into_iter().map(|l| l - gauge).collect();
    let exact = xs.iter().map(|x| shift * x - 0.5 * shift * shift).collect();
    Ok(RatioCurve { xs, logit, exact })
}

/// Student law, teacher law, and the student tilted by the exact and the
/// learned reward.
#[derive(Debug, Clone, PartialEq)]
pub struct Tilt {
    pub student: Vec<f64>,
    pub teacher: Vec<f64>,
    pub exact: Vec<f64>,
    pub trained: Vec<f64>,
}

impl Tilt {
    pub fn trained_tv(&self) -> f64 {
        total_variation(&self.trained, &self.teacher)
    }
}

fn normalize(w: &[f64]) -> Vec<f64> {
    let z: f64 = w.iter().sum();
    w.iter().map(|x| x / z).collect()
}

/// Unnormalized weights are accepted for both laws.
pub fn tilt(student: &[f64], teacher: &[f64], steps: usize, seed: u64) -> afd::Result<Tilt> {
    let toy = DiscreteToy::new("demo", normalize(student), normalize(teacher))?;
    let exact_reward: Vec<f64> = toy.log_ratio().iter().map(|l| l.exp()).collect();
    let budget = Budget {
        steps,
        batch: 256,
        lr: 1e-2,
    };
    let logits = train_outcome_logits(&toy, &budget, seed)?;
    let learned: Vec<f64> = logits.iter().map(|l| l.exp()).collect();
    Ok(Tilt {
        exact: normalized_tilt(&toy.student, &exact_reward),
        trained: normalized_tilt(&toy.student, &learned),
        student: toy.student,
        teacher: toy.teacher,
    })
}

/// Position traces of `n` oscillator rollouts for one prompt, row-major
/// `[rollout][block]`, with the mean physics residual against the true
/// dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct Traces {
    pub blocks: usize,
    pub positions: Vec<f64>,
    pub residual: f64,
}

pub fn traces(prompt: usize, frequency_scale: f64, n: usize, seed: u64) -> afd::Result<Traces> {
    let truth = OscillatorConfig {
        blocks: 16,
        ..Default::default()
    };
    let source = PhysicsTeacher::new(OscillatorConfig {
        frequency_scale,
        ..truth.clone()
    })?;
    let dynamics = truth.dynamics(prompt);
    let mut positions = Vec::with_capacity(n * truth.blocks);
    let mut residual = 0.0;
    for i in 0..n {
        let v = source.sample(prompt, &mut stream(seed, &[i as u64]))?;
        positions.extend(v.blocks.column(0).iter());
        residual += physics_residual(&v, &dynamics)? / n as f64;
    }
    Ok(Traces {
        blocks: truth.blocks,
        positions,
        residual,
    })
}

// ---------------------------------------------------------------------------
// JavaScript bindings

#[wasm_bindgen(js_name = RatioCurve)]
pub struct JsRatioCurve(RatioCurve);

#[wasm_bindgen(js_class = RatioCurve)]
impl JsRatioCurve {
    #[wasm_bindgen(getter)]
    pub fn xs(&self) -> Vec<f64> {
        self.0.xs.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn logit(&self) -> Vec<f64> {
        self.0.logit.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn exact(&self) -> Vec<f64> {
        self.0.exact.clone()
    }
    #[wasm_bindgen(getter, js_name = maxGap)]
    pub fn max_gap(&self) -> f64 {
        self.0.max_gap()
    }
}

#[wasm_bindgen(js_name = ratioCurve)]
pub fn ratio_curve_js(shift: f64, steps: usize, seed: u64) -> Result<JsRatioCurve, JsError> {
    ratio_curve(shift, steps, seed).map(JsRatioCurve).map_err(js)
}

#[wasm_bindgen(js_name = Tilt)]
pub struct JsTilt(Tilt);

#[wasm_bindgen(js_class = Tilt)]
impl JsTilt {
    #[wasm_bindgen(getter)]
    pub fn student(&self) -> Vec<f64> {
        self.0.student.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn teacher(&self) -> Vec<f64> {
        self.0.teacher.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn exact(&self) -> Vec<f64> {
        self.0.exact.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn trained(&self) -> Vec<f64> {
        self.0.trained.clone()
    }
    #[wasm_bindgen(getter, js_name = trainedTv)]
    pub fn trained_tv(&self) -> f64 {
        self.0.trained_tv()
    }
}

#[wasm_bindgen(js_name = tilt)]
pub fn tilt_js(student: Vec<f64>, teacher: Vec<f64>, steps: usize, seed: u64) -> Result<JsTilt, JsError> {
    tilt(&student, &teacher, steps, seed).map(JsTilt).map_err(js)
}

#[wasm_bindgen(js_name = Traces)]
pub struct JsTraces(Traces);

#[wasm_bindgen(js_class = Traces)]
impl JsTraces {
    #[wasm_bindgen(getter)]
    pub fn blocks(&self) -> usize {
        self.0.blocks
    }
    #[wasm_bindgen(getter)]
    pub fn positions(&self) -> Vec<f64> {
        self.0.positions.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn residual(&self) -> f64 {
        self.0.residual
    }
}

#[wasm_bindgen(js_name = traces)]
pub fn traces_js(prompt: usize, frequency_scale: f64, n: usize, seed: u64) -> Result<JsTraces, JsError> {
    traces(prompt, frequency_scale, n, seed).map(JsTraces).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_curve_tracks_the_linear_log_ratio() {
        let c = ratio_curve(1.0, 600, 3).unwrap();
        assert_eq!(c.xs.len(), c.logit.len());
        assert!(c.max_gap() < 0.3, "gap {}", c.max_gap());
    }

    #[test]
    fn exact_tilt_lands_on_the_teacher() {
        let t = tilt(&[1.0, 1.0, 2.0], &[3.0, 1.0, 1.0], 200, 1).unwrap();
        for (a, b) in t.exact.iter().zip(&t.teacher) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(t.trained_tv() < 0.1, "tv {}", t.trained_tv());
    }

    #[test]
    fn true_dynamics_have_lower_residual_than_a_detuned_source() {
        let own = traces(2, 1.0, 64, 5).unwrap();
        let off = traces(2, 0.5, 64, 5).unwrap();
        assert_eq!(own.positions.len(), 64 * own.blocks);
        assert!(own.residual < off.residual);
    }

    #[test]
    fn bad_input_is_an_error() {
        assert!(tilt(&[1.0, -1.0], &[1.0, 1.0], 10, 0).is_err());
        assert!(traces(99, 1.0, 4, 0).is_err());
    }
}
