//! Verification instances shipped as data files: discrete outcome tables,
//! finite clean-sample supports and one-dimensional density pairs.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::teacher::MixtureConfig;

const DISCRETE: &str = include_str!("../../data/discrete_toys.toml");
const VELOCITY: &str = include_str!("../../data/velocity_toys.toml");
const RATIO: &str = include_str!("../../data/ratio_cases.toml");

/// Largest discrete support the exact checks enumerate.
pub const MAX_OUTCOMES: usize = 32;

fn check_table(name: &str, what: &str, p: &[f64]) -> Result<()> {
    if p.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
        return Err(Error::Config(format!("{name}: {what} entries must be positive")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-6 {
        return Err(Error::Config(format!("{name}: {what} sums to {s}")));
    }
    Ok(())
}

fn normalized(p: &[f64]) -> Vec<f64> {
    let s: f64 = p.iter().sum();
    p.iter().map(|x| x / s).collect()
}

/// A finite outcome space with explicit student and teacher probabilities.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteToy {
    pub name: String,
    pub student: Vec<f64>,
    pub teacher: Vec<f64>,
}

impl DiscreteToy {
    /// Validates and renormalizes the tables so they sum to one in floating
    /// point.
    pub fn new(name: impl Into<String>, student: Vec<f64>, teacher: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if student.is_empty() || student.len() > MAX_OUTCOMES {
            return Err(Error::Config(format!(
                "{name}: need 1..={MAX_OUTCOMES} outcomes, got {}",
                student.len()
            )));
        }
        if student.len() != teacher.len() {
            return Err(Error::Config(format!("{name}: student and teacher tables differ in size")));
        }
        check_table(&name, "student", &student)?;
        check_table(&name, "teacher", &teacher)?;
        Ok(Self {
            student: normalized(&student),
            teacher: normalized(&teacher),
            name,
        })
    }

    pub fn outcomes(&self) -> usize {
        self.student.len()
    }

    /// `log(π_T / π_θ)` per outcome.
    pub fn log_ratio(&self) -> Vec<f64> {
        self.teacher.iter().zip(&self.student).map(|(t, s)| (t / s).ln()).collect()
    }
}

/// Finite 2-D support with a rollout law and per-point rewards.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VelocityToy {
    pub name: String,
    pub support: Vec<[f64; 2]>,
    pub student: Vec<f64>,
    pub tilt: Vec<f64>,
    pub times: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl VelocityToy {
    pub fn validate(&self) -> Result<()> {
        let n = self.support.len();
        if n == 0 || n > MAX_OUTCOMES {
            return Err(Error::Config(format!("{}: support of {n} points", self.name)));
        }
        if self.student.len() != n || self.tilt.len() != n {
            return Err(Error::Config(format!("{}: one weight and one reward per point", self.name)));
        }
        check_table(&self.name, "student", &self.student)?;
        if self.tilt.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::Config(format!("{}: rewards must be positive", self.name)));
        }
        if self.times.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return Err(Error::Config(format!("{}: grid times must lie in (0, 1)", self.name)));
        }
        if !(self.hi > self.lo) || self.points < 2 {
            return Err(Error::Config(format!("{}: empty lattice", self.name)));
        }
        Ok(())
    }

    /// Every `(x, t)` evaluation point.
    pub fn grid(&self) -> Vec<([f64; 2], f64)> {
        let step = (self.hi - self.lo) / (self.points - 1) as f64;
        let mut out = Vec::with_capacity(self.times.len() * self.points * self.points);
        for &t in &self.times {
            for i in 0..self.points {
                for j in 0..self.points {
                    out.push(([self.lo + i as f64 * step, self.lo + j as f64 * step], t));
                }
            }
        }
        out
    }
}

/// One side of a 1-D ratio case.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mixture1d {
    pub means: [f64; 2],
    pub weights: [f64; 2],
    pub std: f64,
}

impl Mixture1d {
    /// The same law as a single-prompt, single-block mixture teacher.
    pub fn config(&self) -> MixtureConfig {
        MixtureConfig {
            blocks: 1,
            dim: 1,
            means: vec![[vec![self.means[0]], vec![self.means[1]]]],
            weights: vec![self.weights],
            std: self.std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatioCase {
    pub name: String,
    pub teacher: Mixture1d,
    pub student: Mixture1d,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub tolerance: f64,
}

impl RatioCase {
    pub fn grid(&self) -> Vec<f64> {
        let step = (self.hi - self.lo) / (self.points.max(2) - 1) as f64;
        (0..self.points).map(|i| self.lo + i as f64 * step).collect()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DiscreteFile {
    toy: Vec<DiscreteToy>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VelocityFile {
    toy: Vec<VelocityToy>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RatioFile {
    case: Vec<RatioCase>,
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config(format!("{what}: {e}")))
}

pub fn parse_discrete(text: &str) -> Result<Vec<DiscreteToy>> {
    parse::<DiscreteFile>(text, "discrete toys")?
        .toy
        .into_iter()
        .map(|t| DiscreteToy::new(t.name, t.student, t.teacher))
        .collect()
}

pub fn parse_velocity(text: &str) -> Result<Vec<VelocityToy>> {
    let toys = parse::<VelocityFile>(text, "velocity toys")?.toy;
    for t in &toys {
        t.validate()?;
    }
    Ok(toys)
}

pub fn parse_ratio(text: &str) -> Result<Vec<RatioCase>> {
    let cases = parse::<RatioFile>(text, "ratio cases")?.case;
    for c in &cases {
        if !(c.tolerance >= 0.0) {
            return Err(Error::Config(format!("{}: negative tolerance", c.name)));
        }
        crate::teacher::MixtureTeacher::new(c.teacher.config())?;
        crate::teacher::MixtureTeacher::new(c.student.config())?;
    }
    Ok(cases)
}

pub fn discrete_toys() -> Vec<DiscreteToy> {
    parse_discrete(DISCRETE).expect("bundled discrete toys")
}

pub fn velocity_toys() -> Vec<VelocityToy> {
    parse_velocity(VELOCITY).expect("bundled velocity toys")
}

pub fn ratio_cases() -> Vec<RatioCase> {
    parse_ratio(RATIO).expect("bundled ratio cases")
}
