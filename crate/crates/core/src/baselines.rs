//! Comparison arms: supervised fine-tuning on teacher videos, video-level
//! adversarial training through the sampler, and advantage-weighted
//! positive-only regression on rollouts.

use crate::autodiff::{AdamW, Bound, Mat, ParamStore, Tape, Var};
use crate::discriminator::Discriminator;
use crate::error::{Error, Result};
use crate::flowpath::{fm_loss, row_sq_error, FlowBatch, Schedule};
use crate::rng::{normal_matrix, Rng};
use crate::student::{Source, StudentCtx, StudentField, Video};

/// Flow-matching loss on teacher videos, each block conditioned on the
/// teacher's own prefix.
pub fn sft_loss(
    tape: &mut Tape,
    params: &Bound,
    field: &StudentField,
    teacher: &[Video],
    sched: Schedule,
    rng: &mut Rng,
) -> Result<Var> {
    if let Some(i) = teacher.iter().position(|v| v.source != Source::Teacher) {
        return Err(Error::Input(format!("sft: video {i} is not a teacher video")));
    }
    let batch = StudentField::noised_states(teacher, sched, rng)?;
    fm_loss(tape, params, field, &batch)
}

/// Returns `(loss before the step, pre-clip gradient norm)`.
pub fn sft_step(
    field: &StudentField,
    params: &mut ParamStore,
    opt: &mut AdamW,
    teacher: &[Video],
    sched: Schedule,
    rng: &mut Rng,
) -> Result<(f64, f64)> {
    let mut tape = Tape::new();
    let bound = tape.bind(params)?;
    let loss = sft_loss(&mut tape, &bound, field, teacher, sched, rng)?;
    let value = tape.scalar(loss);
    let grads = bound.collect(&tape.backward(loss)?);
    Ok((value, opt.step(params, &grads)?))
}

/// A rollout recorded on the tape so gradients reach the student parameters
/// through every Euler step and every generated history. Noise is drawn in
/// the same order as [`StudentField::rollout`], so values agree with it.
/// Returns the flattened videos (n x K·d).
pub fn rollout_graph(
    tape: &mut Tape,
    params: &Bound,
    field: &StudentField,
    prompts: &[usize],
    steps: usize,
    rngs: &mut [Rng],
) -> Result<Var> {
    if prompts.len() != rngs.len() || prompts.is_empty() {
        return Err(Error::Input("rollout_graph: one random stream per prompt".into()));
    }
    if steps == 0 {
        return Err(Error::Input("rollout_graph: need at least one step".into()));
    }
    let (n, k_total, d) = (prompts.len(), field.geom.blocks, field.geom.dim);
    let zeros = tape.constant(Mat::zeros((n, d)))?;
    let mut blocks: Vec<Var> = Vec::with_capacity(k_total);
    let mut running = zeros;
    let h = 1.0 / steps as f64;
    for k in 0..k_total {
        let (hist_mean, hist_last) = if k == 0 {
            (zeros, zeros)
        } else {
            (tape.scale(running, 1.0 / k as f64)?, blocks[k - 1])
        };
        let has_hist = vec![k > 0; n];
        let mut x1 = Mat::zeros((n, d));
        for (i, rng) in rngs.iter_mut().enumerate() {
            x1.row_mut(i).assign(&normal_matrix(1, d, rng).row(0));
        }
        let mut x = tape.constant(x1)?;
        for i in 0..steps {
            let t = 1.0 - i as f64 * h;
            let v = field.velocity_vars(tape, params, x, &vec![t; n], hist_mean, hist_last, &has_hist, prompts)?;
            let dx = tape.scale(v, h)?;
            x = tape.sub(x, dx)?;
        }
        running = tape.add(running, x)?;
        blocks.push(x);
    }
    tape.concat(&blocks)
}

/// Split a flattened rollout back into videos.
pub fn videos_from_flat(flat: &Mat, prompts: &[usize], blocks: usize, dim: usize, source: Source) -> Result<Vec<Video>> {
    prompts
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let b = Mat::from_shape_vec((blocks, dim), flat.row(i).to_vec())
                .map_err(|e| Error::Input(e.to_string()))?;
            Video::new(b, p, source)
        })
        .collect()
}

/// Generator loss `−mean D(x̂, y)` with the discriminator frozen and the
/// rollout differentiable. Returns the loss node and the rollout node.
pub fn gan_generator_loss(
    tape: &mut Tape,
    theta: &Bound,
    field: &StudentField,
    disc: &Discriminator,
    phi: &Bound,
    prompts: &[usize],
    steps: usize,
    rngs: &mut [Rng],
) -> Result<(Var, Var)> {
    let flat = rollout_graph(tape, theta, field, prompts, steps, rngs)?;
    let logits = disc.logits_var(tape, phi, flat, prompts)?;
    let m = tape.mean(logits)?;
    Ok((tape.scale(m, -1.0)?, flat))
}

/// `mean_i w_i‖v_θ − v‖²` on noised rollout states: advantage-weighted
/// regression without the signed operators.
pub fn dmd_scaffold_loss(
    tape: &mut Tape,
    params: &Bound,
    field: &StudentField,
    batch: &FlowBatch<StudentCtx>,
    weights: &[f64],
) -> Result<Var> {
    if weights.len() != batch.len() {
        return Err(Error::Input(format!("{} weights for {} states", weights.len(), batch.len())));
    }
    if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
        return Err(Error::Input(format!("weight {w} outside [0, 1]")));
    }
    let x_t = tape.constant(batch.x_t.clone())?;
    let target = tape.constant(batch.target.clone())?;
    let v = crate::flowpath::FlowField::velocity(field, tape, params, x_t, &batch.t, &batch.ctx)?;
    let e = row_sq_error(tape, v, target)?;
    let w = tape.constant(Mat::from_shape_vec((weights.len(), 1), weights.to_vec()).expect("column"))?;
    let we = tape.mul(e, w)?;
    tape.mean(we)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::grad_check_sampled;
    use crate::discriminator::DiscGeometry;
    use crate::rng::stream;
    use crate::student::StudentGeometry;

    fn geom() -> StudentGeometry {
        StudentGeometry {
            blocks: 3,
            dim: 2,
            prompts: 2,
            hidden: 8,
            layers: 1,
            time_embed: 4,
            enc_width: 3,
            prompt_width: 2,
        }
    }

    fn streams(n: usize, seed: u64) -> Vec<Rng> {
        (0..n).map(|i| stream(seed, &[i as u64])).collect()
    }

    #[test]
    fn graph_rollout_matches_plain_rollout() {
        let (f, p) = StudentField::init(&geom(), &mut stream(1, &[])).unwrap();
        let prompts = [0, 1, 1];
        let plain = f.rollout(&p, &prompts, 3, &mut streams(3, 5)).unwrap();
        let mut tape = Tape::new();
        let b = tape.bind(&p).unwrap();
        let flat = rollout_graph(&mut tape, &b, &f, &prompts, 3, &mut streams(3, 5)).unwrap();
        let vids = videos_from_flat(tape.value(flat), &prompts, 3, 2, Source::Student).unwrap();
        for (a, b) in plain.iter().zip(&vids) {
            let diff = (&a.blocks - &b.blocks).iter().fold(0.0f64, |m, d| m.max(d.abs()));
            assert!(diff < 1e-12, "{diff}");
        }
    }

    #[test]
    fn sft_rejects_student_videos() {
        let (f, p) = StudentField::init(&geom(), &mut stream(1, &[])).unwrap();
        let v = Video::new(Mat::zeros((3, 2)), 0, Source::Student).unwrap();
        let mut tape = Tape::new();
        let b = tape.bind(&p).unwrap();
        let r = sft_loss(&mut tape, &b, &f, &[v], Schedule::RectifiedFlow, &mut stream(0, &[]));
        assert!(matches!(r, Err(Error::Input(_))));
    }

    #[test]
    fn generator_gradient_through_one_step_rollout() {
        let mut g = geom();
        g.blocks = 2;
        let (f, p) = StudentField::init(&g, &mut stream(1, &[])).unwrap();
        let dg = DiscGeometry {
            blocks: 2,
            dim: 2,
            prompts: 2,
            enc_width: 3,
            prompt_width: 2,
            hidden: 5,
            layers: 1,
        };
        let (d, phi) = Discriminator::init(&dg, &mut stream(2, &[])).unwrap();
        let prompts = [0, 1];
        let r = grad_check_sampled(
            |tape, b| {
                let frozen = tape.bind_frozen(&phi)?;
                let (l, _) = gan_generator_loss(tape, b, &f, &d, &frozen, &prompts, 1, &mut streams(2, 3))?;
                Ok(l)
            },
            &p,
            1e-5,
            1e-4,
            Some(6),
        )
        .unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn uniform_weights_reduce_to_plain_regression() {
        let (f, p) = StudentField::init(&geom(), &mut stream(1, &[])).unwrap();
        let vids = f.rollout(&p, &[0, 1], 2, &mut streams(2, 4)).unwrap();
        let batch = StudentField::noised_states(&vids, Schedule::RectifiedFlow, &mut stream(6, &[])).unwrap();
        let mut tape = Tape::new();
        let b = tape.bind(&p).unwrap();
        let weighted = dmd_scaffold_loss(&mut tape, &b, &f, &batch, &vec![1.0; batch.len()]).unwrap();
        let plain = fm_loss(&mut tape, &b, &f, &batch).unwrap();
        assert!((tape.scalar(weighted) - tape.scalar(plain)).abs() < 1e-14);
    }
}
