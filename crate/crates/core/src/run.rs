//! Run directories: a config snapshot, per-step and evaluation CSVs,
//! checkpoints, and a summary. Also the sweeps and the cross-run report.
//!
//! ```text
//! <out>/config.toml
//! <out>/metrics.csv        one row per step
//! <out>/eval.csv           step, sliced_wasserstein, physics_residual
//! <out>/checkpoints/latest.afdp, step_NNNNNN.afdp, abort.afdp
//! <out>/summary.toml
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autodiff::ParamStore;
use crate::config::RunConfig;
use crate::discriminator::DiscLoss;
use crate::error::{Error, Result};
use crate::svg::LinePlot;
use crate::trainer::{build_teacher, EvalMetrics, EvalSet, StepMetrics, Trainer, METRIC_COLUMNS};

pub const EVAL_COLUMNS: [&str; 3] = ["step", "sliced_wasserstein", "physics_residual"];

/// Final record of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSummary {
    pub arm: String,
    pub seed: u64,
    pub status: String,
    pub steps_completed: u64,
    pub teacher_queries: u64,
    pub base_sliced_wasserstein: f64,
    pub base_physics_residual: Option<f64>,
    pub final_sliced_wasserstein: f64,
    pub final_physics_residual: Option<f64>,
    /// Mean discriminator reward over the last quarter of student steps.
    pub tail_mean_reward: Option<f64>,
    pub tail_mean_w: Option<f64>,
    pub error: Option<String>,
}

impl RunSummary {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("summary.toml");
        let text = fs::read_to_string(&path)
            .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Rows of a CSV file as strings, header excluded.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    let header = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|x| x.iter().map(String::from).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()
        .map_err(csv_err)?;
    Ok((header, rows))
}

fn eval_record(e: &EvalMetrics) -> Vec<String> {
    vec![
        e.step.to_string(),
        format!("{}", e.sliced_wasserstein),
        e.physics_residual.map(|r| format!("{r}")).unwrap_or_default(),
    ]
}

fn parse_opt(s: &str) -> Option<f64> {
    if s.is_empty() {
        None
    } else {
        s.parse().ok()
    }
}

/// Appending writers for the two logs, flushed after every row so an abort
/// leaves everything written so far on disk.
struct Logs {
    metrics: csv::Writer<fs::File>,
    eval: csv::Writer<fs::File>,
}

impl Logs {
    fn open(dir: &Path, metrics_rows: &[Vec<String>], eval_rows: &[Vec<String>]) -> Result<Self> {
        write_csv(&dir.join("metrics.csv"), &METRIC_COLUMNS, metrics_rows)?;
        write_csv(&dir.join("eval.csv"), &EVAL_COLUMNS, eval_rows)?;
        let open = |name: &str| -> Result<csv::Writer<fs::File>> {
            let f = fs::OpenOptions::new().append(true).open(dir.join(name))?;
            Ok(csv::Writer::from_writer(f))
        };
        Ok(Self {
            metrics: open("metrics.csv")?,
            eval: open("eval.csv")?,
        })
    }

    fn step(&mut self, m: &StepMetrics) -> Result<()> {
        self.metrics.write_record(m.record()).map_err(csv_err)?;
        self.metrics.flush()?;
        Ok(())
    }

    fn eval(&mut self, e: &EvalMetrics) -> Result<()> {
        self.eval.write_record(eval_record(e)).map_err(csv_err)?;
        self.eval.flush()?;
        Ok(())
    }
}

/// Where a run starts from.
pub enum Start {
    Fresh(ParamStore),
    /// Continue from `<out>/checkpoints/latest.afdp`.
    Resume,
}

fn checkpoint_dir(out: &Path) -> PathBuf {
    out.join("checkpoints")
}

/// Drive a trainer to the end of its budget inside `out`. `log` receives
/// progress lines.
pub fn distill(cfg: RunConfig, out: &Path, start: Start, log: &mut dyn FnMut(&str)) -> Result<RunSummary> {
    cfg.validate()?;
    fs::create_dir_all(checkpoint_dir(out))?;
    let handle = build_teacher(&cfg.teacher, cfg.student.blocks, cfg.student.dim, cfg.student.prompts)?;
    let eval_set = EvalSet::new(&cfg, &handle)?;
    let teacher = build_teacher(&cfg.teacher, cfg.student.blocks, cfg.student.dim, cfg.student.prompts)?.into_black_box();

    let (mut trainer, mut logs, mut history) = match start {
        Start::Fresh(base) => {
            fs::write(out.join("config.toml"), cfg.to_toml())?;
            let trainer = Trainer::new(cfg.clone(), base, teacher)?;
            let logs = Logs::open(out, &[], &[])?;
            (trainer, logs, Vec::new())
        }
        Start::Resume => {
            let snapshot = RunConfig::from_toml(&fs::read_to_string(out.join("config.toml"))?)?;
            if snapshot != cfg {
                return Err(Error::Config(format!(
                    "resume: configuration differs from the snapshot in {}",
                    out.display()
                )));
            }
            let trainer = Trainer::resume(cfg.clone(), &checkpoint_dir(out).join("latest.afdp"), teacher)?;
            let at = trainer.state.step;
            let (_, metrics) = read_csv(&out.join("metrics.csv"))?;
            let (_, evals) = read_csv(&out.join("eval.csv"))?;
            let keep_m: Vec<Vec<String>> = metrics
                .into_iter()
                .filter(|r| r[0].parse::<u64>().is_ok_and(|s| s < at))
                .collect();
            let keep_e: Vec<Vec<String>> = evals
                .into_iter()
                .filter(|r| r[0].parse::<u64>().is_ok_and(|s| s <= at))
                .collect();
            let history = keep_m.iter().map(|r| row_to_metrics(r)).collect();
            let logs = Logs::open(out, &keep_m, &keep_e)?;
            log(&format!("resumed at step {at}"));
            (trainer, logs, history)
        }
    };

    let sample_steps = cfg.sample_steps;
    let evaluate = |t: &Trainer| eval_set.evaluate(&t.student, &t.state.theta, sample_steps, t.state.step);
    if trainer.state.step == 0 {
        let e = evaluate(&trainer)?;
        logs.eval(&e)?;
    }
    let total = cfg.total_steps() as u64;
    let result: Result<()> = (|| {
        while trainer.remaining() > 0 {
            let m = trainer.step()?;
            logs.step(&m)?;
            history.push(m);
            let s = trainer.state.step;
            if (cfg.eval.every > 0 && s % cfg.eval.every as u64 == 0) || s == total {
                let e = evaluate(&trainer)?;
                logs.eval(&e)?;
                log(&format!(
                    "step {s}/{total}  sw {:.4}  residual {}",
                    e.sliced_wasserstein,
                    e.physics_residual.map(|r| format!("{r:.4}")).unwrap_or("-".into())
                ));
            }
            if (cfg.checkpoint_every > 0 && s % cfg.checkpoint_every as u64 == 0) || s == total {
                trainer.save_checkpoint(&checkpoint_dir(out).join(format!("step_{s:06}.afdp")))?;
                trainer.save_checkpoint(&checkpoint_dir(out).join("latest.afdp"))?;
            }
        }
        Ok(())
    })();

    let (_, evals) = read_csv(&out.join("eval.csv"))?;
    let mut summary = summarize(&cfg, &evals, &history, trainer.state.step);
    if let Err(e) = result {
        if matches!(e, Error::Numerical { .. }) {
            trainer.save_checkpoint(&checkpoint_dir(out).join("abort.afdp"))?;
        }
        summary.status = "aborted".into();
        summary.error = Some(e.to_string());
        fs::write(out.join("summary.toml"), toml::to_string(&summary).expect("summary serializes"))?;
        return Err(e);
    }
    fs::write(out.join("summary.toml"), toml::to_string(&summary).expect("summary serializes"))?;
    Ok(summary)
}

fn row_to_metrics(r: &[String]) -> StepMetrics {
    StepMetrics {
        step: r[0].parse().unwrap_or(0),
        arm: r[1].clone(),
        phase: r[2].clone(),
        mean_reward: parse_opt(&r[7]),
        mean_w: parse_opt(&r[8]),
        teacher_queries: r[11].parse().unwrap_or(0),
        ..Default::default()
    }
}

fn tail_mean(history: &[StepMetrics], pick: impl Fn(&StepMetrics) -> Option<f64>) -> Option<f64> {
    let train: Vec<f64> = history.iter().filter(|m| m.phase == "train").filter_map(&pick).collect();
    if train.is_empty() {
        return None;
    }
    let tail = &train[train.len() - train.len().div_ceil(4)..];
    Some(tail.iter().sum::<f64>() / tail.len() as f64)
}

fn summarize(cfg: &RunConfig, evals: &[Vec<String>], history: &[StepMetrics], steps: u64) -> RunSummary {
    let sw = |r: &Vec<String>| r[1].parse::<f64>().unwrap_or(f64::NAN);
    let res = |r: &Vec<String>| parse_opt(&r[2]);
    let first = evals.first();
    let last = evals.last();
    RunSummary {
        arm: cfg.arm.name().into(),
        seed: cfg.seed,
        status: "complete".into(),
        steps_completed: steps,
        teacher_queries: history.iter().map(|m| m.teacher_queries).sum(),
        base_sliced_wasserstein: first.map(sw).unwrap_or(f64::NAN),
        base_physics_residual: first.and_then(res),
        final_sliced_wasserstein: last.map(sw).unwrap_or(f64::NAN),
        final_physics_residual: last.and_then(res),
        tail_mean_reward: tail_mean(history, |m| m.mean_reward),
        tail_mean_w: tail_mean(history, |m| m.mean_w),
        error: None,
    }
}

/// Per-step `(step, value)` pairs of one metric column, train phase only.
pub fn metric_series(dir: &Path, column: &str) -> Result<Vec<(f64, f64)>> {
    let (header, rows) = read_csv(&dir.join("metrics.csv"))?;
    let c = header
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::Input(format!("no column `{column}` in {}", dir.display())))?;
    Ok(rows
        .iter()
        .filter(|r| r[2] == "train")
        .filter_map(|r| Some((r[0].parse().ok()?, parse_opt(&r[c])?)))
        .collect())
}

/// `(step, value)` pairs from the evaluation log.
pub fn eval_series(dir: &Path, column: &str) -> Result<Vec<(f64, f64)>> {
    let (header, rows) = read_csv(&dir.join("eval.csv"))?;
    let c = header
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::Input(format!("no column `{column}` in {}", dir.display())))?;
    Ok(rows
        .iter()
        .filter_map(|r| Some((r[0].parse().ok()?, parse_opt(&r[c])?)))
        .collect())
}

/// Moving average over `window` points, for plotting noisy per-step series.
pub fn smooth(points: &[(f64, f64)], window: usize) -> Vec<(f64, f64)> {
    let w = window.max(1);
    let mut out = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    for i in 0..points.len() {
        acc += points[i].1;
        if i >= w {
            acc -= points[i - w].1;
        }
        out.push((points[i].0, acc / (i + 1).min(w) as f64));
    }
    out
}

// ---------------------------------------------------------------------------
// Sweeps

/// Nominal discriminator learning rates of the default sweep; each is
/// multiplied by the config's `disc_lr_scale`.
pub const DEFAULT_DISC_RATES: [f64; 5] = [0.0, 1e-6, 5e-6, 1e-5, 5e-5];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub label: String,
    pub dir: PathBuf,
    pub summary: RunSummary,
}

fn rate_dir(i: usize, rate: f64) -> String {
    format!("rate_{i}_{rate:e}")
}

/// One run per nominal rate from the same base and seed, then a reward CSV,
/// a summary CSV and an overlay plot in `out`.
pub fn ablate_disc_lr(
    cfg: &RunConfig,
    rates: &[f64],
    base: &ParamStore,
    out: &Path,
    log: &mut dyn FnMut(&str),
) -> Result<Vec<SweepEntry>> {
    if rates.is_empty() {
        return Err(Error::Config("ablate-disc-lr: rate list is empty".into()));
    }
    if let Some(r) = rates.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
        return Err(Error::Config(format!("ablate-disc-lr: invalid rate {r}")));
    }
    if !cfg.arm.uses_discriminator() {
        return Err(Error::Config(format!("ablate-disc-lr: the {} arm has no discriminator", cfg.arm.name())));
    }
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let mut entries = Vec::new();
    for (i, &rate) in rates.iter().enumerate() {
        let mut c = cfg.clone();
        c.lr_disc = rate;
        let dir = out.join(rate_dir(i, rate));
        log(&format!("rate {rate:e} (effective {:e})", c.eta_disc()));
        let summary = distill(c, &dir, Start::Fresh(base.clone()), log)?;
        entries.push(SweepEntry {
            label: format!("{rate:e}"),
            dir,
            summary,
        });
    }
    write_sweep_outputs(out, "eta_d", &entries, "Discriminator reward by learning rate")?;
    Ok(entries)
}

/// BT and GAN discriminator arms with everything else fixed.
pub fn ablate_disc_loss(cfg: &RunConfig, base: &ParamStore, out: &Path, log: &mut dyn FnMut(&str)) -> Result<Vec<SweepEntry>> {
    if !cfg.arm.uses_discriminator() {
        return Err(Error::Config(format!("ablate-disc-loss: the {} arm has no discriminator", cfg.arm.name())));
    }
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let mut entries = Vec::new();
    for loss in [DiscLoss::Bt, DiscLoss::Gan] {
        let mut c = cfg.clone();
        c.discriminator.loss = loss;
        let dir = out.join(loss.name());
        log(&format!("discriminator loss {}", loss.name()));
        let summary = distill(c, &dir, Start::Fresh(base.clone()), log)?;
        entries.push(SweepEntry {
            label: loss.name().into(),
            dir,
            summary,
        });
    }
    write_sweep_outputs(out, "disc_loss", &entries, "Discriminator reward by loss")?;
    Ok(entries)
}

fn write_sweep_outputs(out: &Path, key: &str, entries: &[SweepEntry], title: &str) -> Result<()> {
    let mut rows = Vec::new();
    let mut plot = LinePlot::new(title, "step", "mean reward (smoothed)");
    for e in entries {
        let reward = metric_series(&e.dir, "mean_reward")?;
        let w = metric_series(&e.dir, "mean_w")?;
        for ((s, r), (_, wv)) in reward.iter().zip(&w) {
            rows.push(vec![e.label.clone(), s.to_string(), format!("{r}"), format!("{wv}")]);
        }
        plot.add(&e.label, smooth(&reward, 25));
    }
    write_csv(&out.join("reward.csv"), &[key, "step", "mean_reward", "mean_w"], &rows)?;
    fs::write(out.join("reward.svg"), plot.render())?;
    let table: Vec<Vec<String>> = entries.iter().map(|e| summary_row(&e.label, &e.summary)).collect();
    let mut header = vec![key];
    header.extend(SUMMARY_COLUMNS);
    write_csv(&out.join("summary.csv"), &header, &table)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Report

const SUMMARY_COLUMNS: [&str; 6] = [
    "arm",
    "seed",
    "sliced_wasserstein",
    "physics_residual",
    "tail_mean_reward",
    "status",
];

fn opt_cell(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into())
}

fn summary_row(label: &str, s: &RunSummary) -> Vec<String> {
    vec![
        label.to_string(),
        s.arm.clone(),
        s.seed.to_string(),
        format!("{:.6}", s.final_sliced_wasserstein),
        opt_cell(s.final_physics_residual),
        opt_cell(s.tail_mean_reward),
        s.status.clone(),
    ]
}

/// Comparison table (one row per run) and metric curves for completed runs.
/// Returns the table as aligned text.
pub fn report(runs: &[PathBuf], out: &Path) -> Result<String> {
    if runs.is_empty() {
        return Err(Error::Input("report: no run directories given".into()));
    }
    let mut summaries = Vec::new();
    for dir in runs {
        if !dir.is_dir() {
            return Err(Error::Input(format!("report: missing run {}", dir.display())));
        }
        summaries.push(RunSummary::load(dir)?);
    }
    fs::create_dir_all(out)?;
    let labels: Vec<String> = runs
        .iter()
        .map(|d| d.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default())
        .collect();
    let rows: Vec<Vec<String>> = labels.iter().zip(&summaries).map(|(l, s)| summary_row(l, s)).collect();
    let mut header = vec!["run"];
    header.extend(SUMMARY_COLUMNS);
    write_csv(&out.join("report.csv"), &header, &rows)?;

    let mut sw = LinePlot::new("Sliced Wasserstein to teacher", "step", "sliced W1");
    let mut res = LinePlot::new("Physics residual", "step", "residual");
    let mut reward = LinePlot::new("Discriminator reward", "step", "mean reward (smoothed)");
    let mut loss = LinePlot::new("Student loss", "step", "loss (smoothed)");
    for (l, dir) in labels.iter().zip(runs) {
        sw.add(l, eval_series(dir, "sliced_wasserstein")?);
        let r = eval_series(dir, "physics_residual")?;
        if !r.is_empty() {
            res.add(l, r);
        }
        let m = metric_series(dir, "mean_reward")?;
        if !m.is_empty() {
            reward.add(l, smooth(&m, 25));
        }
        loss.add(l, smooth(&metric_series(dir, "student_loss")?, 25));
    }
    fs::write(out.join("sliced_wasserstein.svg"), sw.render())?;
    fs::write(out.join("physics_residual.svg"), res.render())?;
    fs::write(out.join("reward.svg"), reward.render())?;
    fs::write(out.join("student_loss.svg"), loss.render())?;

    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let fmt = |cells: Vec<&str>| -> String {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut text = fmt(header.clone()) + "\n";
    for r in &rows {
        text += &(fmt(r.iter().map(String::as_str).collect()) + "\n");
    }
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_covers_last_quarter_of_student_steps() {
        let mut h = Vec::new();
        for i in 0..4 {
            h.push(StepMetrics {
                phase: "warmup".into(),
                mean_reward: Some(100.0),
                step: i,
                ..Default::default()
            });
        }
        for i in 0..8 {
            h.push(StepMetrics {
                phase: "train".into(),
                mean_reward: Some(i as f64),
                step: 4 + i,
                ..Default::default()
            });
        }
        assert_eq!(tail_mean(&h, |m| m.mean_reward), Some(6.5));
        assert_eq!(tail_mean(&h[..4], |m| m.mean_reward), None);
    }

    #[test]
    fn smoothing_is_a_trailing_mean() {
        let s = smooth(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)], 2);
        assert_eq!(s, vec![(0.0, 1.0), (1.0, 2.0), (2.0, 4.0)]);
    }

    #[test]
    fn report_requires_existing_runs() {
        let d = tempfile::tempdir().unwrap();
        assert!(matches!(report(&[], d.path()), Err(Error::Input(_))));
        assert!(matches!(report(&[d.path().join("nope")], d.path()), Err(Error::Input(_))));
    }

    #[test]
    fn empty_rate_list_rejected() {
        let d = tempfile::tempdir().unwrap();
        let cfg = RunConfig::default();
        let base = ParamStore::new();
        let r = ablate_disc_lr(&cfg, &[], &base, d.path(), &mut |_| {});
        assert!(matches!(r, Err(Error::Config(_))));
        let r = ablate_disc_lr(&cfg, &[-1.0], &base, d.path(), &mut |_| {});
        assert!(matches!(r, Err(Error::Config(_))));
    }
}
