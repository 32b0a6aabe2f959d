use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use afd::config::{Arm, RunConfig};
use afd::error::{Error, Result};
use afd::eval::verify::{self, Suite, VerifySettings};
use afd::run::{self, Start, DEFAULT_DISC_RATES};
use afd::trainer::{load_student, pretrain};

#[derive(Parser)]
#[command(name = "afd", version, about = "Adversarial flow distillation lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the training commands.
#[derive(clap::Args)]
struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Student steps (discriminator warm-up comes on top).
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the base student on the source domain.
    Pretrain(RunArgs),
    /// Train one arm from the base student.
    Distill {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        arm: Option<String>,
        /// Continue the run in --out from its latest checkpoint.
        #[arg(long)]
        resume: bool,
    },
    /// One run per discriminator learning rate.
    AblateDiscLr {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated nominal rates, each multiplied by disc_lr_scale.
        #[arg(long, value_delimiter = ',')]
        rates: Option<Vec<f64>>,
    },
    /// Bradley-Terry against binary cross-entropy discriminators.
    AblateDiscLoss {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the verification suite.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        /// Verification settings (TOML); defaults are used when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Tables and plots across completed runs.
    Report {
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical { .. } => 2,
        Error::Verification(_) => 3,
        _ => 1,
    }
}

fn load_config(args: &RunArgs, arm: Option<&str>) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.steps {
        cfg.steps = n;
    }
    if let Some(a) = arm {
        cfg.arm = Arm::from_name(a)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn base_student(cfg: &RunConfig) -> Result<afd::autodiff::ParamStore> {
    let path = cfg.base_checkpoint.as_ref().ok_or_else(|| {
        Error::Config("base_checkpoint: not set; create one with `afd pretrain` and point the config at it".into())
    })?;
    if !path.exists() {
        return Err(Error::Config(format!("base_checkpoint: {} does not exist", path.display())));
    }
    load_student(path, cfg)
}

fn absolute_base(cfg: &mut RunConfig) -> Result<()> {
    if let Some(p) = &cfg.base_checkpoint {
        if p.exists() {
            cfg.base_checkpoint = Some(std::fs::canonicalize(p)?);
        }
    }
    Ok(())
}

fn say(line: &str) {
    eprintln!("{line}");
}

fn run_pretrain(args: &RunArgs) -> Result<()> {
    let cfg = load_config(args, None)?;
    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join("config.toml"), cfg.to_toml())?;
    let every = (cfg.pretrain.steps / 10).max(1);
    let mut losses = Vec::with_capacity(cfg.pretrain.steps);
    let params = pretrain(&cfg, |step, loss| {
        losses.push(loss);
        if (step + 1) % every == 0 {
            say(&format!("pretrain {}/{}  loss {loss:.4}", step + 1, cfg.pretrain.steps));
        }
    })?;
    let path = args.out.join("base.afdp");
    params.save(&path)?;
    let mut w = csv::Writer::from_path(args.out.join("pretrain.csv")).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    w.write_record(["step", "loss"]).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    for (i, l) in losses.iter().enumerate() {
        w.write_record([i.to_string(), format!("{l}")])
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    println!("{}", path.display());
    Ok(())
}

fn run_distill(args: &RunArgs, arm: Option<&str>, resume: bool) -> Result<()> {
    let summary = if resume {
        let snapshot = args.out.join("config.toml");
        let text = std::fs::read_to_string(&snapshot)
            .map_err(|e| Error::Config(format!("resume: cannot read {}: {e}", snapshot.display())))?;
        let cfg = RunConfig::from_toml(&text)?;
        run::distill(cfg, &args.out, Start::Resume, &mut say)?
    } else {
        let mut cfg = load_config(args, arm)?;
        absolute_base(&mut cfg)?;
        let base = base_student(&cfg)?;
        run::distill(cfg, &args.out, Start::Fresh(base), &mut say)?
    };
    print!("{}", toml::to_string(&summary).expect("summary serializes"));
    Ok(())
}

fn run_verify(suite: &str, config: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let suite = Suite::from_name(suite)?;
    let mut settings = match config {
        Some(p) => VerifySettings::from_toml(
            &std::fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
        )?,
        None => VerifySettings::default(),
    };
    if let Some(s) = seed {
        settings.seed = s;
    }
    settings.validate()?;
    let checks = verify::run(suite, &settings)?;
    for c in &checks {
        println!("{}", c.line());
    }
    let failed: Vec<_> = checks.iter().filter(|c| !c.passed).collect();
    println!("{} of {} checks passed", checks.len() - failed.len(), checks.len());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Verification(
            failed.iter().map(|c| format!("{}/{}", c.suite, c.name)).collect::<Vec<_>>().join(", "),
        ))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Pretrain(a) => run_pretrain(a),
        Command::Distill { run, arm, resume } => run_distill(run, arm.as_deref(), *resume),
        Command::AblateDiscLr { run, rates } => (|| {
            let mut cfg = load_config(run, None)?;
            absolute_base(&mut cfg)?;
            let base = base_student(&cfg)?;
            let rates = rates.clone().unwrap_or(DEFAULT_DISC_RATES.to_vec());
            run::ablate_disc_lr(&cfg, &rates, &base, &run.out, &mut say)?;
            print!("{}", std::fs::read_to_string(run.out.join("summary.csv"))?);
            Ok(())
        })(),
        Command::AblateDiscLoss { run } => (|| {
            let mut cfg = load_config(run, None)?;
            absolute_base(&mut cfg)?;
            let base = base_student(&cfg)?;
            run::ablate_disc_loss(&cfg, &base, &run.out, &mut say)?;
            print!("{}", std::fs::read_to_string(run.out.join("summary.csv"))?);
            Ok(())
        })(),
        Command::Verify { suite, config, seed } => run_verify(suite, config.as_deref(), *seed),
        Command::Report { runs, out } => run::report(runs, out).map(|t| print!("{t}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
