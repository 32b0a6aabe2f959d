//! Whole runs in temporary directories: replay determinism, resume, and the
//! command-line front end.

use std::path::{Path, PathBuf};
use std::process::Command;

use afd::config::RunConfig;
use afd::run::{self, RunSummary, Start};
use afd::trainer::pretrain;

const SMOKE: &str = r#"
version = 1
seed = 3
arm = "afd"
steps = 8
batch = 8
group = 4
disc_warmup = 4
teacher_pool = 32
checkpoint_every = 3

[teacher]
kind = "oscillator"
blocks = 4
prompts = 2

[student]
blocks = 4
prompts = 2
hidden = 12
layers = 1

[discriminator]
hidden = 12
layers = 1

[pretrain]
steps = 30
batch = 16

[eval]
every = 4
samples_per_prompt = 4
projections = 8
"#;

fn smoke() -> RunConfig {
    RunConfig::from_toml(SMOKE).unwrap()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn quiet(_: &str) {}

#[test]
fn identical_runs_write_identical_logs() {
    let cfg = smoke();
    let base = pretrain(&cfg, |_, _| {}).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let sa = run::distill(cfg.clone(), &a, Start::Fresh(base.clone()), &mut quiet).unwrap();
    let sb = run::distill(cfg.clone(), &b, Start::Fresh(base), &mut quiet).unwrap();
    assert_eq!(sa, sb);
    for f in ["metrics.csv", "eval.csv", "summary.toml", "config.toml"] {
        assert_eq!(read(&a.join(f)), read(&b.join(f)), "{f}");
    }
    assert_eq!(sa.steps_completed, 12);
    assert_eq!(sa.teacher_queries, 12 * 8);
    assert_eq!(RunSummary::load(&a).unwrap(), sa);
}

#[test]
fn resuming_inside_the_warmup_reproduces_the_straight_run() {
    let cfg = smoke();
    let base = pretrain(&cfg, |_, _| {}).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (straight, resumed) = (dir.path().join("straight"), dir.path().join("resumed"));
    run::distill(cfg.clone(), &straight, Start::Fresh(base.clone()), &mut quiet).unwrap();
    run::distill(cfg.clone(), &resumed, Start::Fresh(base), &mut quiet).unwrap();

    // pretend the run stopped after step 3, still discriminator-only
    let ck = resumed.join("checkpoints");
    std::fs::copy(ck.join("step_000003.afdp"), ck.join("latest.afdp")).unwrap();
    std::fs::write(resumed.join("summary.toml"), "").unwrap();
    run::distill(cfg.clone(), &resumed, Start::Resume, &mut quiet).unwrap();
    for f in ["metrics.csv", "eval.csv", "summary.toml"] {
        assert_eq!(read(&straight.join(f)), read(&resumed.join(f)), "{f}");
    }
    assert_eq!(
        std::fs::read(straight.join("checkpoints/latest.afdp")).unwrap(),
        std::fs::read(resumed.join("checkpoints/latest.afdp")).unwrap()
    );
}

#[test]
fn resume_refuses_a_changed_config() {
    let cfg = smoke();
    let base = pretrain(&cfg, |_, _| {}).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run::distill(cfg.clone(), dir.path(), Start::Fresh(base), &mut quiet).unwrap();
    let mut other = cfg;
    other.afd.beta = 0.2;
    assert!(matches!(
        run::distill(other, dir.path(), Start::Resume, &mut quiet),
        Err(afd::Error::Config(_))
    ));
}

// ---------------------------------------------------------------------------
// Command line

fn afd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_afd"))
}

fn code(cmd: &mut Command) -> (i32, String, String) {
    let out = cmd.output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_config(dir: &Path, base: &str) -> PathBuf {
    let path = dir.join("smoke.toml");
    std::fs::write(&path, format!("base_checkpoint = \"{base}\"\n{SMOKE}")).unwrap();
    path
}

#[test]
fn command_line_pretrain_distill_resume_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write_config(d, "base/base.afdp");

    let (c, out, err) = code(afd().args(["pretrain", "--config"]).arg(&cfg).arg("--out").arg(d.join("base")));
    assert_eq!(c, 0, "{err}");
    assert!(out.trim().ends_with("base.afdp"));
    assert!(d.join("base/pretrain.csv").exists());

    let run_dir = d.join("afd");
    let (c, out, err) = code(afd().args(["distill", "--config"]).arg(&cfg).arg("--out").arg(&run_dir));
    assert_eq!(c, 0, "{err}");
    let summary: RunSummary = toml::from_str(&out).unwrap();
    assert_eq!(summary.status, "complete");
    assert_eq!(summary, RunSummary::load(&run_dir).unwrap());

    let (c, _, err) = code(
        afd()
            .args(["distill", "--arm", "sft", "--steps", "4", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(d.join("sft")),
    );
    assert_eq!(c, 0, "{err}");

    let before = read(&run_dir.join("metrics.csv"));
    let ck = run_dir.join("checkpoints");
    std::fs::copy(ck.join("step_000006.afdp"), ck.join("latest.afdp")).unwrap();
    let (c, _, err) = code(afd().args(["distill", "--resume", "--config"]).arg(&cfg).arg("--out").arg(&run_dir));
    assert_eq!(c, 0, "{err}");
    assert_eq!(read(&run_dir.join("metrics.csv")), before);

    let (c, table, err) = code(afd().arg("report").arg(&run_dir).arg(d.join("sft")).arg("--out").arg(d.join("report")));
    assert_eq!(c, 0, "{err}");
    assert!(table.contains("afd") && table.contains("sft"), "{table}");
    assert!(d.join("report/report.csv").exists());
}

#[test]
fn command_line_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    // missing base checkpoint: configuration error
    let cfg = write_config(d, "nowhere/base.afdp");
    let (c, _, err) = code(afd().args(["distill", "--config"]).arg(&cfg).arg("--out").arg(d.join("x")));
    assert_eq!(c, 1, "{err}");
    assert!(err.contains("base_checkpoint"), "{err}");

    let (c, _, _) = code(afd().args(["distill", "--arm", "nope", "--config"]).arg(&cfg).arg("--out").arg(d.join("x")));
    assert_eq!(c, 1);

    let (c, _, _) = code(afd().args(["verify", "--suite", "bogus"]));
    assert_eq!(c, 1);

    let (c, out, err) = code(afd().args(["verify", "--suite", "algebra"]));
    assert_eq!(c, 0, "{err}");
    assert!(out.lines().all(|l| !l.starts_with("[FAIL]")), "{out}");

    // an unattainable tolerance is a verification failure
    let strict = d.join("strict.toml");
    std::fs::write(&strict, "[tolerances]\ngradient = 0.0\n").unwrap();
    let (c, out, _) = code(afd().args(["verify", "--suite", "gradients", "--config"]).arg(&strict));
    assert_eq!(c, 3);
    assert!(out.contains("[FAIL]"), "{out}");

    let bad = d.join("bad.toml");
    std::fs::write(&bad, "[tolerances]\ngradient = -1.0\n").unwrap();
    let (c, _, _) = code(afd().args(["verify", "--config"]).arg(&bad));
    assert_eq!(c, 1);
}
