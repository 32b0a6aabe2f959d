//! Acceptance criteria, one `[PASS]`/`[FAIL]` line each. Exits nonzero when
//! any criterion fails.
//!
//! The distillation criteria train full oscillator runs (about half an hour
//! on one core); they share runs where the configurations coincide.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use afd::autodiff::ParamStore;
use afd::config::{Arm, RunConfig};
use afd::discriminator::DiscLoss;
use afd::eval::verify::{self, Check, Suite, VerifySettings};
use afd::run::{self, RunSummary, Start, DEFAULT_DISC_RATES};
use afd::trainer::pretrain;

const SEEDS: [u64; 3] = [7, 8, 9];

struct Outcome {
    passed: bool,
    detail: String,
}

fn report(n: usize, title: &str, started: Instant, o: &Outcome) -> bool {
    println!(
        "[{}] {n}. {title}: {} ({:.0}s)",
        if o.passed { "PASS" } else { "FAIL" },
        o.detail,
        started.elapsed().as_secs_f64()
    );
    o.passed
}

fn from_checks(checks: &[Check]) -> Outcome {
    let failed: Vec<_> = checks.iter().filter(|c| !c.passed).collect();
    let worst = checks
        .iter()
        .map(|c| format!("{} {:.2e}/{:.0e}", c.name, c.observed, c.tolerance))
        .collect::<Vec<_>>();
    Outcome {
        passed: failed.is_empty() && !checks.is_empty(),
        detail: if failed.is_empty() {
            format!("{} checks; {}", checks.len(), worst.join(", "))
        } else {
            failed.iter().map(|c| c.line()).collect::<Vec<_>>().join("; ")
        },
    }
}

fn suite(s: Suite, pick: impl Fn(&Check) -> bool) -> Outcome {
    match verify::run(s, &VerifySettings::default()) {
        Ok(checks) => from_checks(&checks.into_iter().filter(|c| pick(c)).collect::<Vec<_>>()),
        Err(e) => Outcome {
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    xs[xs.len() / 2]
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn oscillator(seed: u64) -> RunConfig {
    let mut cfg = RunConfig::load(&configs_dir().join("oscillator.toml")).expect("oscillator config");
    cfg.seed = seed;
    cfg.base_checkpoint = None;
    cfg
}

fn quiet(_: &str) {}

/// Every full-size run, keyed by seed and a label.
struct Runs {
    root: tempfile::TempDir,
    bases: BTreeMap<u64, ParamStore>,
    done: BTreeMap<(u64, String), afd::Result<RunSummary>>,
}

impl Runs {
    fn new() -> Self {
        Self {
            root: tempfile::tempdir().expect("tempdir"),
            bases: BTreeMap::new(),
            done: BTreeMap::new(),
        }
    }

    fn base(&mut self, seed: u64) -> afd::Result<ParamStore> {
        if let Some(b) = self.bases.get(&seed) {
            return Ok(b.clone());
        }
        let b = pretrain(&oscillator(seed), |_, _| {})?;
        self.bases.insert(seed, b.clone());
        Ok(b)
    }

    /// The run with `edit` applied to the default config. Configs that
    /// compare equal share one run.
    fn get(&mut self, seed: u64, edit: impl Fn(&mut RunConfig)) -> Result<RunSummary, String> {
        let mut cfg = oscillator(seed);
        edit(&mut cfg);
        let key = (seed, cfg.to_toml());
        if !self.done.contains_key(&key) {
            let dir = self.root.path().join(format!("run_{}", self.done.len()));
            let r = self.base(seed).and_then(|b| run::distill(cfg, &dir, Start::Fresh(b), &mut quiet));
            self.done.insert(key.clone(), r);
        }
        self.done[&key].as_ref().map(|s| s.clone()).map_err(|e| e.to_string())
    }
}

fn criterion_8(runs: &mut Runs) -> Outcome {
    let (mut sw_cut, mut res_cut, mut gap) = (Vec::new(), Vec::new(), Vec::new());
    let mut lines = Vec::new();
    for seed in SEEDS {
        let afd = runs.get(seed, |_| {});
        let sft = runs.get(seed, |c| c.arm = Arm::Sft);
        let (afd, sft) = match (afd, sft) {
            (Ok(a), Ok(s)) => (a, s),
            (Err(e), _) | (_, Err(e)) => {
                return Outcome {
                    passed: false,
                    detail: format!("seed {seed}: {e}"),
                }
            }
        };
        let sw = 1.0 - afd.final_sliced_wasserstein / afd.base_sliced_wasserstein;
        let res = match (afd.final_physics_residual, afd.base_physics_residual) {
            (Some(f), Some(b)) => 1.0 - f / b,
            _ => f64::NAN,
        };
        sw_cut.push(sw);
        res_cut.push(res);
        gap.push(sft.final_sliced_wasserstein - afd.final_sliced_wasserstein);
        lines.push(format!(
            "seed {seed}: SW -{:.0}%, residual -{:.0}%, SW afd {:.3} vs sft {:.3}",
            100.0 * sw,
            100.0 * res,
            afd.final_sliced_wasserstein,
            sft.final_sliced_wasserstein
        ));
    }
    let (sw, res, gap) = (median(sw_cut), median(res_cut), median(gap));
    Outcome {
        passed: sw >= 0.4 && res >= 0.3 && gap > 0.0,
        detail: format!(
            "median SW reduction {:.0}% (>= 40%), residual {:.0}% (>= 30%), sft - afd SW {gap:.4} (> 0); {}",
            100.0 * sw,
            100.0 * res,
            lines.join("; ")
        ),
    }
}

fn criterion_9(runs: &mut Runs) -> Outcome {
    let mut per_rate = Vec::new();
    for &rate in &DEFAULT_DISC_RATES {
        let mut rewards = Vec::new();
        for seed in SEEDS {
            match runs.get(seed, |c| c.lr_disc = rate) {
                Ok(s) => rewards.push(s.tail_mean_reward.unwrap_or(f64::NAN)),
                Err(e) => {
                    return Outcome {
                        passed: false,
                        detail: format!("rate {rate:e}, seed {seed}: {e}"),
                    }
                }
            }
        }
        per_rate.push((rate, median(rewards)));
    }
    let frozen = per_rate[0].1;
    let largest = per_rate[per_rate.len() - 1].1;
    let middle = &per_rate[1..per_rate.len() - 1];
    let stable = middle.iter().any(|&(_, r)| (0.35..=0.65).contains(&r));
    Outcome {
        passed: frozen > 0.7 && largest < 0.3 && stable,
        detail: format!(
            "median tail reward {} (frozen > 0.7, largest < 0.3, some intermediate in [0.35, 0.65])",
            per_rate.iter().map(|(r, w)| format!("{r:e}: {w:.3}")).collect::<Vec<_>>().join(", ")
        ),
    }
}

fn criterion_10(runs: &mut Runs) -> Outcome {
    let (mut bt, mut gan) = (Vec::new(), Vec::new());
    for seed in SEEDS {
        let pair = (
            runs.get(seed, |c| c.discriminator.loss = DiscLoss::Bt),
            runs.get(seed, |c| c.discriminator.loss = DiscLoss::Gan),
        );
        match pair {
            (Ok(b), Ok(g)) => {
                bt.push(b.final_physics_residual.unwrap_or(f64::NAN));
                gan.push(g.final_physics_residual.unwrap_or(f64::NAN));
            }
            (Err(e), _) | (_, Err(e)) => {
                return Outcome {
                    passed: false,
                    detail: format!("seed {seed}: {e}"),
                }
            }
        }
    }
    let detail = format!("per seed bt {bt:.4?}, gan {gan:.4?}");
    let (b, g) = (median(bt), median(gan));
    Outcome {
        passed: b <= g,
        detail: format!("median final residual bt {b:.4} <= gan {g:.4}; {detail}"),
    }
}

fn same_file(a: &Path, b: &Path) -> bool {
    matches!((std::fs::read(a), std::fs::read(b)), (Ok(x), Ok(y)) if x == y)
}

fn criterion_11() -> Outcome {
    let attempt = || -> afd::Result<Outcome> {
        let mut cfg = RunConfig::load(&configs_dir().join("smoke.toml"))?;
        cfg.base_checkpoint = None;
        let base = pretrain(&cfg, |_, _| {})?;
        let dir = tempfile::tempdir()?;
        let [a, b, c] = ["a", "b", "c"].map(|n| dir.path().join(n));
        for d in [&a, &b, &c] {
            run::distill(cfg.clone(), d, Start::Fresh(base.clone()), &mut quiet)?;
        }
        let files = ["metrics.csv", "eval.csv", "summary.toml"];
        let replay = files.iter().all(|f| same_file(&a.join(f), &b.join(f)));

        // restart `c` from a checkpoint past the discriminator warm-up
        let ck = c.join("checkpoints");
        std::fs::copy(ck.join("step_000020.afdp"), ck.join("latest.afdp"))?;
        run::distill(cfg.clone(), &c, Start::Resume, &mut quiet)?;
        let resumed = files.iter().all(|f| same_file(&a.join(f), &c.join(f)))
            && same_file(&a.join("checkpoints/latest.afdp"), &ck.join("latest.afdp"));
        Ok(Outcome {
            passed: replay && resumed,
            detail: format!("replay identical: {replay}; resume from step 20 identical: {resumed}"),
        })
    };
    attempt().unwrap_or_else(|e| Outcome {
        passed: false,
        detail: format!("error: {e}"),
    })
}

fn main() -> ExitCode {
    let mut ok = true;
    let mut check = |n: usize, title: &str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        ok &= report(n, title, t, &o);
    };

    check(1, "v± identities", &mut || suite(Suite::Algebra, |c| !c.name.starts_with("half weights")));
    check(2, "w = 0.5 neutrality", &mut || suite(Suite::Algebra, |c| c.name.starts_with("half weights")));
    check(3, "gradient correctness", &mut || suite(Suite::Gradients, |_| true));
    check(4, "density-ratio recovery", &mut || suite(Suite::Ratio, |_| true));
    check(5, "tilted-law equivalence", &mut || suite(Suite::Tilt, |_| true));
    check(6, "conditional-velocity identity", &mut || suite(Suite::Velocity, |_| true));
    check(7, "reverse-KL maximizer", &mut || suite(Suite::ReverseKl, |_| true));

    let mut runs = Runs::new();
    check(8, "end-to-end distillation", &mut || criterion_8(&mut runs));
    check(9, "discriminator learning-rate regimes", &mut || criterion_9(&mut runs));
    check(10, "BT vs GAN discriminator loss", &mut || criterion_10(&mut runs));
    check(11, "determinism and resume", &mut criterion_11);

    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
