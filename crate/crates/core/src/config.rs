//! Run configuration: a versioned TOML schema with unknown keys rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::discriminator::{DiscGeometry, DiscLoss};
use crate::error::{Error, Result};
use crate::flowpath::Schedule;
use crate::objective::AfdConfig;
use crate::student::StudentGeometry;
use crate::teacher::{HiddenFlowConfig, MixtureConfig, OscillatorConfig, ShiftConfig};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    #[default]
    Afd,
    Base,
    Sft,
    Gan,
    DmdScaffold,
}

impl Arm {
    pub const ALL: [Arm; 5] = [Arm::Afd, Arm::Base, Arm::Sft, Arm::Gan, Arm::DmdScaffold];

    pub fn name(self) -> &'static str {
        match self {
            Arm::Afd => "afd",
            Arm::Base => "base",
            Arm::Sft => "sft",
            Arm::Gan => "gan",
            Arm::DmdScaffold => "dmd_scaffold",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown arm `{s}`; expected one of afd, base, sft, gan, dmd_scaffold")))
    }

    /// Whether the arm trains on its own rollouts.
    pub fn default_on_policy(self) -> bool {
        !matches!(self, Arm::Sft)
    }

    pub fn uses_discriminator(self) -> bool {
        matches!(self, Arm::Afd | Arm::Gan | Arm::DmdScaffold)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RolloutPolicy {
    #[default]
    Live,
    Ema,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TeacherSpec {
    Oscillator(OscillatorConfig),
    Shifted {
        #[serde(default)]
        oscillator: OscillatorConfig,
        #[serde(default)]
        shift: ShiftConfig,
    },
    Mixture {
        std: f64,
        mixture_seed: u64,
    },
    MixtureTable(MixtureConfig),
    HiddenFlow {
        #[serde(default)]
        target: OscillatorConfig,
        #[serde(default)]
        flow: HiddenFlowConfig,
        /// Checkpoint of a trained hidden flow teacher; trained on first use
        /// when absent.
        checkpoint: Option<PathBuf>,
    },
}

impl Default for TeacherSpec {
    fn default() -> Self {
        TeacherSpec::Oscillator(OscillatorConfig::default())
    }
}

impl TeacherSpec {
    /// The oscillator whose dynamics define the physics residual, if any.
    pub fn dynamics_source(&self) -> Option<&OscillatorConfig> {
        match self {
            TeacherSpec::Oscillator(o) => Some(o),
            TeacherSpec::HiddenFlow { target, .. } => Some(target),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TeacherSpec::Oscillator(_) => "oscillator",
            TeacherSpec::Shifted { .. } => "shifted",
            TeacherSpec::Mixture { .. } | TeacherSpec::MixtureTable(_) => "mixture",
            TeacherSpec::HiddenFlow { .. } => "hidden_flow",
        }
    }
}

/// Discriminator widths; block count, block size and prompt count follow the
/// student geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscSection {
    pub loss: DiscLoss,
    pub enc_width: usize,
    pub prompt_width: usize,
    pub hidden: usize,
    pub layers: usize,
    /// Std of Gaussian noise added to both sides of every discriminator
    /// update.
    pub instance_noise: f64,
}

impl Default for DiscSection {
    fn default() -> Self {
        let g = DiscGeometry::default();
        Self {
            loss: DiscLoss::Bt,
            enc_width: g.enc_width,
            prompt_width: g.prompt_width,
            hidden: g.hidden,
            layers: g.layers,
            instance_noise: 0.0,
        }
    }
}

/// Flow-matching pretraining of the base student on a source domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PretrainSection {
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    /// Frequency multiplier of the source oscillator relative to the teacher.
    pub frequency_scale: f64,
}

impl Default for PretrainSection {
    fn default() -> Self {
        Self {
            steps: 3000,
            batch: 32,
            lr: 1e-3,
            frequency_scale: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Evaluate every this many steps (0: only at the end).
    pub every: usize,
    pub samples_per_prompt: usize,
    pub projections: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            every: 250,
            samples_per_prompt: 64,
            projections: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub version: u32,
    pub seed: u64,
    pub arm: Arm,
    pub steps: usize,
    pub batch: usize,
    /// Rollouts per prompt in one batch; prompts per step = batch / group.
    pub group: usize,
    /// Student learning rate before `lr_scale`.
    pub lr_student: f64,
    pub lr_disc: f64,
    /// Multiplier on the student learning rate.
    pub lr_scale: f64,
    /// Multiplier on the discriminator learning rate.
    pub disc_lr_scale: f64,
    /// Discriminator-only steps before the first student update, for arms
    /// that use a discriminator.
    pub disc_warmup: usize,
    pub sample_steps: usize,
    pub schedule: Schedule,
    pub rollout_policy: RolloutPolicy,
    /// Defaults to the arm's own convention when unset.
    pub on_policy: Option<bool>,
    pub teacher_pool: usize,
    pub checkpoint_every: usize,
    /// Base student checkpoint; relative paths resolve against the config file.
    pub base_checkpoint: Option<PathBuf>,
    pub teacher: TeacherSpec,
    pub student: StudentGeometry,
    pub discriminator: DiscSection,
    pub afd: AfdConfig,
    pub pretrain: PretrainSection,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 7,
            arm: Arm::Afd,
            steps: 2000,
            batch: 64,
            group: 8,
            lr_student: 1e-5,
            lr_disc: 1e-5,
            lr_scale: 3.0,
            disc_lr_scale: 100.0,
            disc_warmup: 300,
            sample_steps: 4,
            schedule: Schedule::RectifiedFlow,
            rollout_policy: RolloutPolicy::Live,
            on_policy: None,
            teacher_pool: 4096,
            checkpoint_every: 500,
            base_checkpoint: None,
            teacher: TeacherSpec::default(),
            student: StudentGeometry::default(),
            discriminator: DiscSection::default(),
            afd: AfdConfig::default(),
            pretrain: PretrainSection::default(),
            eval: EvalSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = &cfg.base_checkpoint {
            if base.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.base_checkpoint = Some(dir.join(base));
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn on_policy(&self) -> bool {
        self.on_policy.unwrap_or(self.arm.default_on_policy())
    }

    /// Student steps plus any discriminator warm-up.
    pub fn total_steps(&self) -> usize {
        if self.arm.uses_discriminator() {
            self.steps + self.disc_warmup
        } else {
            self.steps
        }
    }

    pub fn eta_student(&self) -> f64 {
        self.lr_student * self.lr_scale
    }

    pub fn eta_disc(&self) -> f64 {
        self.lr_disc * self.disc_lr_scale
    }

    pub fn disc_geometry(&self) -> DiscGeometry {
        DiscGeometry {
            blocks: self.student.blocks,
            dim: self.student.dim,
            prompts: self.student.prompts,
            enc_width: self.discriminator.enc_width,
            prompt_width: self.discriminator.prompt_width,
            hidden: self.discriminator.hidden,
            layers: self.discriminator.layers,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "version: unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.batch < 2 {
            return Err(Error::Config("batch: at least 2 rollouts are needed for a baseline".into()));
        }
        if self.group == 0 || self.batch % self.group != 0 {
            return Err(Error::Config(format!("group {} must divide batch {}", self.group, self.batch)));
        }
        for (name, v) in [
            ("lr_student", self.lr_student),
            ("lr_disc", self.lr_disc),
            ("lr_scale", self.lr_scale),
            ("disc_lr_scale", self.disc_lr_scale),
            ("discriminator.instance_noise", self.discriminator.instance_noise),
            ("pretrain.lr", self.pretrain.lr),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name}: must be a finite non-negative number, got {v}")));
            }
        }
        if self.sample_steps == 0 {
            return Err(Error::Config("sample_steps: must be at least 1".into()));
        }
        if self.teacher_pool == 0 {
            return Err(Error::Config("teacher_pool: must be at least 1".into()));
        }
        if self.arm == Arm::Sft && self.on_policy == Some(true) {
            return Err(Error::Config(
                "on_policy: the sft arm trains on teacher videos only and cannot be on-policy".into(),
            ));
        }
        if self.arm != Arm::Sft && self.on_policy == Some(false) {
            return Err(Error::Config(format!(
                "on_policy: the {} arm learns from its own rollouts",
                self.arm.name()
            )));
        }
        if self.eval.samples_per_prompt < 2 || self.eval.projections == 0 {
            return Err(Error::Config("eval: need at least 2 samples per prompt and 1 projection".into()));
        }
        self.student.validate()?;
        self.disc_geometry().validate()?;
        self.afd.validate()?;
        match &self.teacher {
            TeacherSpec::Oscillator(o) => self.check_oscillator(o)?,
            TeacherSpec::Shifted { oscillator, .. } => self.check_oscillator(oscillator)?,
            TeacherSpec::HiddenFlow { target, .. } => self.check_oscillator(target)?,
            TeacherSpec::Mixture { std, .. } => {
                if !(*std > 0.0) {
                    return Err(Error::Config("teacher.std: must be positive".into()));
                }
            }
            TeacherSpec::MixtureTable(m) => {
                if m.blocks != self.student.blocks || m.dim != self.student.dim || m.means.len() != self.student.prompts {
                    return Err(Error::Config("teacher: mixture geometry must match the student".into()));
                }
            }
        }
        Ok(())
    }

    fn check_oscillator(&self, o: &OscillatorConfig) -> Result<()> {
        o.validate()?;
        if o.blocks != self.student.blocks || o.prompts != self.student.prompts || self.student.dim != 2 {
            return Err(Error::Config(format!(
                "teacher: oscillator has {} blocks and {} prompts; student expects {} blocks, {} prompts, dim 2",
                o.blocks, o.prompts, self.student.blocks, self.student.prompts
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn minimal_file_uses_defaults() {
        let c = RunConfig::from_toml("version = 1\narm = \"gan\"\n").unwrap();
        assert_eq!(c.arm, Arm::Gan);
        assert_eq!(c.batch, 64);
        assert!(c.on_policy());
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = RunConfig::from_toml("version = 1\nbatchsize = 3\n").unwrap_err();
        assert!(matches!(e, Error::Config(m) if m.contains("batchsize")));
        assert!(RunConfig::from_toml("version = 1\n[afd]\nbetta = 0.2\n").is_err());
    }

    #[test]
    fn contradictions_rejected() {
        assert!(RunConfig::from_toml("version = 1\narm = \"sft\"\non_policy = true\n").is_err());
        assert!(RunConfig::from_toml("version = 1\narm = \"sft\"\n").is_ok());
        assert!(RunConfig::from_toml("version = 2\n").is_err());
        assert!(RunConfig::from_toml("version = 1\nbatch = 1\n").is_err());
        assert!(RunConfig::from_toml("version = 1\nlr_disc = -1e-5\n").is_err());
    }

    #[test]
    fn teacher_sections_parse() {
        let c = RunConfig::from_toml("version = 1\n[teacher]\nkind = \"mixture\"\nstd = 0.3\nmixture_seed = 4\n").unwrap();
        assert_eq!(c.teacher.name(), "mixture");
        let c = RunConfig::from_toml("version = 1\n[teacher]\nkind = \"oscillator\"\nsigma_obs = 0.2\n").unwrap();
        assert!(matches!(c.teacher, TeacherSpec::Oscillator(ref o) if o.sigma_obs == 0.2));
    }
}
