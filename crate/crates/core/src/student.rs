//! Causal autoregressive flow student.
//!
//! A video is a sequence of `K` clean blocks of dimension `d`. Block `k` is
//! sampled by few-step Euler integration of a velocity field conditioned on a
//! fixed-size summary of the blocks before it and on the prompt embedding.

use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Bound, Mat, ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::flowpath::{euler_integrate, FlowBatch, FlowField, Schedule};
use crate::nn::{expect_param, one_hot, time_embedding, Activation, Mlp};
use crate::rng::{normal_matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Teacher,
    Student,
}

/// A prompt-conditioned sequence of clean blocks, stored as a `K x d` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Video {
    pub blocks: Mat,
    pub prompt: usize,
    pub source: Source,
}

impl Video {
    pub fn new(blocks: Mat, prompt: usize, source: Source) -> Result<Self> {
        if blocks.nrows() == 0 || blocks.ncols() == 0 {
            return Err(Error::Input("video needs at least one block of positive dimension".into()));
        }
        if blocks.iter().any(|x| !x.is_finite()) {
            return Err(Error::numerical("video", "non-finite block value"));
        }
        Ok(Self {
            blocks,
            prompt,
            source,
        })
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.nrows()
    }

    pub fn dim(&self) -> usize {
        self.blocks.ncols()
    }

    pub fn block(&self, k: usize) -> Array1<f64> {
        self.blocks.row(k).to_owned()
    }

    /// Row-major flattening `[block_1, ..., block_K]`.
    pub fn flatten(&self) -> Array1<f64> {
        Array1::from_iter(self.blocks.iter().copied())
    }
}

/// Stack videos into an `n x (K d)` matrix of flattened videos.
pub fn flatten_videos(videos: &[Video]) -> Mat {
    let width = videos.first().map(|v| v.blocks.len()).unwrap_or(0);
    let mut m = Mat::zeros((videos.len(), width));
    for (i, v) in videos.iter().enumerate() {
        m.row_mut(i).assign(&v.flatten());
    }
    m
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudentGeometry {
    pub blocks: usize,
    pub dim: usize,
    pub prompts: usize,
    pub hidden: usize,
    pub layers: usize,
    pub time_embed: usize,
    pub enc_width: usize,
    pub prompt_width: usize,
}

impl Default for StudentGeometry {
    fn default() -> Self {
        Self {
            blocks: 8,
            dim: 2,
            prompts: 8,
            hidden: 128,
            layers: 3,
            time_embed: 16,
            enc_width: 16,
            prompt_width: 8,
        }
    }
}

impl StudentGeometry {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("blocks", self.blocks),
            ("dim", self.dim),
            ("prompts", self.prompts),
            ("hidden", self.hidden),
            ("layers", self.layers),
            ("time_embed", self.time_embed),
            ("enc_width", self.enc_width),
            ("prompt_width", self.prompt_width),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(Error::Config(format!("student.{name} must be positive")));
            }
        }
        Ok(())
    }

    /// Compact text form stored in checkpoint headers.
    pub fn tag(&self) -> String {
        format!(
            "blocks={},dim={},prompts={},hidden={},layers={},time_embed={},enc_width={},prompt_width={}",
            self.blocks,
            self.dim,
            self.prompts,
            self.hidden,
            self.layers,
            self.time_embed,
            self.enc_width,
            self.prompt_width
        )
    }

    fn mlp_sizes(&self) -> Vec<usize> {
        let input = self.dim + self.time_embed + 2 * self.enc_width + self.prompt_width;
        let mut sizes = vec![input];
        sizes.extend(std::iter::repeat_n(self.hidden, self.layers));
        sizes.push(self.dim);
        sizes
    }
}

/// Per-block affine encoder shared by the history summarizer (and reused as
/// an architecture by the discriminator).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockEncoder {
    pub w: ParamId,
    pub b: ParamId,
    pub dim: usize,
    pub width: usize,
}

impl BlockEncoder {
    pub fn init(store: &mut ParamStore, prefix: &str, dim: usize, width: usize, rng: &mut Rng) -> Result<Self> {
        let w = store.add(format!("{prefix}.w"), crate::autodiff::glorot(dim, width, rng))?;
        let b = store.add(format!("{prefix}.b"), Array2::zeros((1, width)))?;
        Ok(Self { w, b, dim, width })
    }

    pub fn attach(store: &ParamStore, prefix: &str, dim: usize, width: usize) -> Result<Self> {
        Ok(Self {
            w: expect_param(store, &format!("{prefix}.w"), (dim, width))?,
            b: expect_param(store, &format!("{prefix}.b"), (1, width))?,
            dim,
            width,
        })
    }

    /// Encode each row (one block per row).
    pub fn forward(&self, tape: &mut Tape, params: &Bound, blocks: Var) -> Result<Var> {
        let h = tape.matmul(blocks, params.var(self.w))?;
        tape.add_row(h, params.var(self.b))
    }
}

/// Conditioning for a batch of rows: history statistics and prompts.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentCtx {
    /// Mean of the prior clean blocks (zeros when there are none).
    pub hist_mean: Mat,
    /// Most recent prior clean block (zeros when there is none).
    pub hist_last: Mat,
    pub has_hist: Vec<bool>,
    pub prompts: Vec<usize>,
}

impl StudentCtx {
    pub fn len(&self) -> usize {
        self.prompts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prompts.is_empty()
    }

    /// Context for block `k` of each video.
    pub fn for_block(videos: &[Video], k: usize) -> Self {
        let d = videos.first().map(Video::dim).unwrap_or(0);
        let n = videos.len();
        let mut hist_mean = Mat::zeros((n, d));
        let mut hist_last = Mat::zeros((n, d));
        for (i, v) in videos.iter().enumerate() {
            if k > 0 {
                let prior = v.blocks.slice(s![..k, ..]);
                hist_mean
                    .row_mut(i)
                    .assign(&prior.mean_axis(ndarray::Axis(0)).expect("nonempty"));
                hist_last.row_mut(i).assign(&v.blocks.row(k - 1));
            }
        }
        Self {
            hist_mean,
            hist_last,
            has_hist: vec![k > 0; n],
            prompts: videos.iter().map(|v| v.prompt).collect(),
        }
    }

    /// Context from explicit histories (each a `k_i x d` matrix, possibly empty).
    pub fn from_histories(histories: &[Mat], prompts: &[usize], dim: usize) -> Self {
        let n = histories.len();
        let mut hist_mean = Mat::zeros((n, dim));
        let mut hist_last = Mat::zeros((n, dim));
        let mut has_hist = vec![false; n];
        for (i, h) in histories.iter().enumerate() {
            if h.nrows() > 0 {
                hist_mean
                    .row_mut(i)
                    .assign(&h.mean_axis(ndarray::Axis(0)).expect("nonempty"));
                hist_last.row_mut(i).assign(&h.row(h.nrows() - 1));
                has_hist[i] = true;
            }
        }
        Self {
            hist_mean,
            hist_last,
            has_hist,
            prompts: prompts.to_vec(),
        }
    }

    /// Row-wise concatenation of several contexts.
    pub fn stack(parts: &[StudentCtx]) -> Self {
        let means: Vec<_> = parts.iter().map(|p| p.hist_mean.view()).collect();
        let lasts: Vec<_> = parts.iter().map(|p| p.hist_last.view()).collect();
        Self {
            hist_mean: ndarray::concatenate(ndarray::Axis(0), &means).expect("same width"),
            hist_last: ndarray::concatenate(ndarray::Axis(0), &lasts).expect("same width"),
            has_hist: parts.iter().flat_map(|p| p.has_hist.iter().copied()).collect(),
            prompts: parts.iter().flat_map(|p| p.prompts.iter().copied()).collect(),
        }
    }
}

/// Architecture of the causal student velocity field `f(x_t, t, h_k, y)`.
/// Parameter values live in a separate [`ParamStore`], so the same
/// architecture serves the live, EMA and frozen reference copies.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentField {
    pub geom: StudentGeometry,
    encoder: BlockEncoder,
    start: ParamId,
    prompt_emb: ParamId,
    mlp: Mlp,
}

impl StudentField {
    pub fn init(geom: &StudentGeometry, rng: &mut Rng) -> Result<(Self, ParamStore)> {
        geom.validate()?;
        let mut store = ParamStore::new();
        let encoder = BlockEncoder::init(&mut store, "hist_enc", geom.dim, geom.enc_width, rng)?;
        let start = store.add("hist_start", Array2::zeros((1, 2 * geom.enc_width)))?;
        let prompt_emb = store.add(
            "prompt_emb",
            crate::autodiff::glorot(geom.prompts, geom.prompt_width, rng),
        )?;
        let mlp = Mlp::init(&mut store, "vel", &geom.mlp_sizes(), Activation::Silu, rng)?;
        mlp.scale_output(&mut store, 0.1);
        store.set_meta("kind", "student");
        store.set_meta("geometry", geom.tag());
        Ok((
            Self {
                geom: geom.clone(),
                encoder,
                start,
                prompt_emb,
                mlp,
            },
            store,
        ))
    }

    /// Resolve the architecture against a loaded store, validating layout.
    pub fn attach(geom: &StudentGeometry, store: &ParamStore) -> Result<Self> {
        geom.validate()?;
        if let Some(tag) = store.meta().get("geometry") {
            if tag != &geom.tag() {
                return Err(Error::Load(format!(
                    "checkpoint geometry `{tag}` does not match configured `{}`",
                    geom.tag()
                )));
            }
        }
        Ok(Self {
            geom: geom.clone(),
            encoder: BlockEncoder::attach(store, "hist_enc", geom.dim, geom.enc_width)?,
            start: expect_param(store, "hist_start", (1, 2 * geom.enc_width))?,
            prompt_emb: expect_param(store, "prompt_emb", (geom.prompts, geom.prompt_width))?,
            mlp: Mlp::attach(store, "vel", &geom.mlp_sizes(), Activation::Silu)?,
        })
    }

    pub fn encoder(&self) -> &BlockEncoder {
        &self.encoder
    }

    /// History summary `h_k` for a batch: `[enc(mean), enc(last)]` where a
    /// history exists, the learned start vector otherwise.
    pub fn summary_vars(
        &self,
        tape: &mut Tape,
        params: &Bound,
        hist_mean: Var,
        hist_last: Var,
        has_hist: &[bool],
    ) -> Result<Var> {
        let n = has_hist.len();
        let em = self.encoder.forward(tape, params, hist_mean)?;
        let el = self.encoder.forward(tape, params, hist_last)?;
        let enc = tape.concat(&[em, el])?;
        let mask = Mat::from_shape_fn((n, 1), |(i, _)| if has_hist[i] { 1.0 } else { 0.0 });
        let inv = mask.mapv(|m| 1.0 - m);
        let mask = tape.constant(mask)?;
        let inv = tape.constant(inv)?;
        let enc = tape.mul_col(enc, mask)?;
        let start = tape.broadcast_rows(params.var(self.start), n)?;
        let start = tape.mul_col(start, inv)?;
        tape.add(enc, start)
    }

    /// Velocity with history statistics given as tape nodes (they may be
    /// differentiable, e.g. when backpropagating through a rollout).
    #[allow(clippy::too_many_arguments)]
    pub fn velocity_vars(
        &self,
        tape: &mut Tape,
        params: &Bound,
        x_t: Var,
        t: &[f64],
        hist_mean: Var,
        hist_last: Var,
        has_hist: &[bool],
        prompts: &[usize],
    ) -> Result<Var> {
        let n = t.len();
        if tape.shape(x_t) != (n, self.geom.dim) {
            return Err(Error::Config(format!(
                "student velocity: x_t shape {:?}, expected ({n}, {})",
                tape.shape(x_t),
                self.geom.dim
            )));
        }
        let h = self.summary_vars(tape, params, hist_mean, hist_last, has_hist)?;
        let temb = tape.constant(time_embedding(t, self.geom.time_embed))?;
        let oh = tape.constant(one_hot(prompts, self.geom.prompts)?)?;
        let p = tape.matmul(oh, params.var(self.prompt_emb))?;
        let input = tape.concat(&[x_t, temb, h, p])?;
        self.mlp.forward(tape, params, input)
    }

    /// Graph-free velocity evaluation.
    pub fn eval(&self, params: &ParamStore, x_t: &Mat, t: &[f64], ctx: &StudentCtx) -> Result<Mat> {
        let mut tape = Tape::new();
        let bound = tape.bind_frozen(params)?;
        let x = tape.constant(x_t.clone())?;
        let v = self.velocity(&mut tape, &bound, x, t, ctx)?;
        Ok(tape.value(v).clone())
    }

    /// Summary vector for a single explicit history (`k x d`, possibly empty).
    pub fn history_summary(&self, params: &ParamStore, history: &Mat) -> Result<Array1<f64>> {
        let ctx = StudentCtx::from_histories(std::slice::from_ref(history), &[0], self.geom.dim);
        let mut tape = Tape::new();
        let bound = tape.bind_frozen(params)?;
        let m = tape.constant(ctx.hist_mean)?;
        let l = tape.constant(ctx.hist_last)?;
        let h = self.summary_vars(&mut tape, &bound, m, l, &ctx.has_hist)?;
        Ok(tape.value(h).row(0).to_owned())
    }

    /// Generate one video per prompt. Video `i` draws all its noise from
    /// `rngs[i]`, so its randomness does not depend on batch composition.
    pub fn rollout(&self, params: &ParamStore, prompts: &[usize], steps: usize, rngs: &mut [Rng]) -> Result<Vec<Video>> {
        if prompts.len() != rngs.len() {
            return Err(Error::Input(format!(
                "rollout: {} prompts but {} random streams",
                prompts.len(),
                rngs.len()
            )));
        }
        if let Some(&p) = prompts.iter().find(|&&p| p >= self.geom.prompts) {
            return Err(Error::Input(format!("prompt {p} out of range 0..{}", self.geom.prompts)));
        }
        let (n, k_total, d) = (prompts.len(), self.geom.blocks, self.geom.dim);
        let mut videos: Vec<Video> = prompts
            .iter()
            .map(|&p| Video {
                blocks: Mat::zeros((k_total, d)),
                prompt: p,
                source: Source::Student,
            })
            .collect();
        for k in 0..k_total {
            let ctx = StudentCtx::for_block(&videos, k);
            let mut x1 = Mat::zeros((n, d));
            for (i, rng) in rngs.iter_mut().enumerate() {
                x1.row_mut(i).assign(&normal_matrix(1, d, rng).row(0));
            }
            let block = euler_integrate(
                |x, t| self.eval(params, x, &vec![t; n], &ctx),
                x1,
                steps,
            )?;
            for (i, v) in videos.iter_mut().enumerate() {
                v.blocks.row_mut(k).assign(&block.row(i));
            }
        }
        Ok(videos)
    }

    /// Forward-noise every block of every video with an independent `(t, ε)`
    /// draw, attaching each block's clean history. Row `i * K + k` holds block
    /// `k` of video `i`.
    pub fn noised_states(videos: &[Video], sched: Schedule, rng: &mut Rng) -> Result<FlowBatch<StudentCtx>> {
        let (x0, ctx) = Self::clean_states(videos)?;
        FlowBatch::sample(x0, sched, ctx, rng)
    }

    /// Clean blocks and their contexts, in the same row order as
    /// [`StudentField::noised_states`].
    pub fn clean_states(videos: &[Video]) -> Result<(Mat, StudentCtx)> {
        let first = videos
            .first()
            .ok_or_else(|| Error::Input("no videos to noise".into()))?;
        let (k_total, d) = (first.num_blocks(), first.dim());
        if videos.iter().any(|v| v.num_blocks() != k_total || v.dim() != d) {
            return Err(Error::Input("videos in a batch must share geometry".into()));
        }
        let n = videos.len() * k_total;
        let mut x0 = Mat::zeros((n, d));
        let mut hist_mean = Mat::zeros((n, d));
        let mut hist_last = Mat::zeros((n, d));
        let mut has_hist = vec![false; n];
        let mut prompts = vec![0; n];
        for (i, v) in videos.iter().enumerate() {
            let mut running = Array1::<f64>::zeros(d);
            for k in 0..k_total {
                let r = i * k_total + k;
                x0.row_mut(r).assign(&v.blocks.row(k));
                prompts[r] = v.prompt;
                if k > 0 {
                    has_hist[r] = true;
                    hist_mean.row_mut(r).assign(&(&running / k as f64));
                    hist_last.row_mut(r).assign(&v.blocks.row(k - 1));
                }
                running += &v.blocks.row(k);
            }
        }
        Ok((
            x0,
            StudentCtx {
                hist_mean,
                hist_last,
                has_hist,
                prompts,
            },
        ))
    }
}

impl FlowField for StudentField {
    type Ctx = StudentCtx;

    fn velocity(&self, tape: &mut Tape, params: &Bound, x_t: Var, t: &[f64], ctx: &StudentCtx) -> Result<Var> {
        let m = tape.constant(ctx.hist_mean.clone())?;
        let l = tape.constant(ctx.hist_last.clone())?;
        self.velocity_vars(tape, params, x_t, t, m, l, &ctx.has_hist, &ctx.prompts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn small() -> StudentGeometry {
        StudentGeometry {
            blocks: 4,
            dim: 2,
            prompts: 3,
            hidden: 16,
            layers: 2,
            time_embed: 8,
            enc_width: 4,
            prompt_width: 3,
        }
    }

    fn streams(n: usize, seed: u64) -> Vec<Rng> {
        (0..n).map(|i| stream(seed, &[i as u64])).collect()
    }

    #[test]
    fn empty_history_maps_to_start_vector() {
        let (f, p) = StudentField::init(&small(), &mut stream(0, &[])).unwrap();
        let h = f.history_summary(&p, &Mat::zeros((0, 2))).unwrap();
        assert_eq!(h, p.by_name("hist_start").unwrap().row(0).to_owned());
    }

    #[test]
    fn summary_is_order_sensitive() {
        let (f, p) = StudentField::init(&small(), &mut stream(1, &[])).unwrap();
        let hist = normal_matrix(3, 2, &mut stream(2, &[]));
        let mut swapped = hist.clone();
        swapped.row_mut(1).assign(&hist.row(2));
        swapped.row_mut(2).assign(&hist.row(1));
        let a = f.history_summary(&p, &hist).unwrap();
        let b = f.history_summary(&p, &swapped).unwrap();
        assert!((&a - &b).iter().any(|x| x.abs() > 1e-9));
    }

    #[test]
    fn single_block_summary_is_injective_affine() {
        // h = [W x + b, W x + b]; injective iff W (d x E) has rank d.
        let (f, p) = StudentField::init(&small(), &mut stream(3, &[])).unwrap();
        let w = p.get(f.encoder().w);
        let (a, b, c, d) = (w[[0, 0]], w[[0, 1]], w[[1, 0]], w[[1, 1]]);
        assert!((a * d - b * c).abs() > 1e-6, "2x2 minor of the encoder is singular");
        let x = ndarray::array![[0.4, -0.9]];
        let h = f.history_summary(&p, &x).unwrap();
        let expected = x.dot(w) + p.get(f.encoder().b);
        for j in 0..4 {
            assert!((h[j] - expected[[0, j]]).abs() < 1e-12);
            assert!((h[j + 4] - expected[[0, j]]).abs() < 1e-12);
        }
    }

    #[test]
    fn rollout_is_deterministic_per_seed() {
        let (f, p) = StudentField::init(&small(), &mut stream(4, &[])).unwrap();
        let a = f.rollout(&p, &[0, 2, 1], 4, &mut streams(3, 9)).unwrap();
        let b = f.rollout(&p, &[0, 2, 1], 4, &mut streams(3, 9)).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|v| v.source == Source::Student && v.num_blocks() == 4));
    }

    #[test]
    fn single_block_rollout_is_unconditional_sample() {
        let mut g = small();
        g.blocks = 1;
        let (f, p) = StudentField::init(&g, &mut stream(5, &[])).unwrap();
        let v = f.rollout(&p, &[1], 3, &mut streams(1, 2)).unwrap();
        let ctx = StudentCtx::from_histories(&[Mat::zeros((0, 2))], &[1], 2);
        let mut rng = stream(2, &[0]);
        let direct = crate::flowpath::sample_ode(|x, t| f.eval(&p, x, &[t], &ctx), 1, 2, 3, &mut rng).unwrap();
        assert_eq!(v[0].blocks, direct);
    }

    #[test]
    fn rollout_rejects_unknown_prompt() {
        let (f, p) = StudentField::init(&small(), &mut stream(6, &[])).unwrap();
        assert!(matches!(f.rollout(&p, &[7], 2, &mut streams(1, 0)), Err(Error::Input(_))));
    }

    #[test]
    fn field_output_ignores_future_blocks() {
        // Perturbing block j changes the conditioning of blocks k > j only.
        let (f, p) = StudentField::init(&small(), &mut stream(7, &[])).unwrap();
        let blocks = normal_matrix(4, 2, &mut stream(8, &[]));
        let v = Video::new(blocks.clone(), 1, Source::Student).unwrap();
        let mut perturbed = blocks.clone();
        perturbed[[2, 0]] += 0.5;
        let w = Video::new(perturbed, 1, Source::Student).unwrap();
        let x = normal_matrix(1, 2, &mut stream(9, &[]));
        for k in 0..4 {
            let a = f.eval(&p, &x, &[0.5], &StudentCtx::for_block(std::slice::from_ref(&v), k)).unwrap();
            let b = f.eval(&p, &x, &[0.5], &StudentCtx::for_block(std::slice::from_ref(&w), k)).unwrap();
            if k <= 2 {
                assert_eq!(a, b, "block {k} must not see block 2");
            } else {
                assert_ne!(a, b);
            }
        }
    }

    #[test]
    fn clean_states_match_per_block_contexts() {
        let vids: Vec<Video> = (0..2)
            .map(|i| Video::new(normal_matrix(4, 2, &mut stream(10, &[i])), i as usize, Source::Student).unwrap())
            .collect();
        let (x0, ctx) = StudentField::clean_states(&vids).unwrap();
        for k in 0..4 {
            let c = StudentCtx::for_block(&vids, k);
            for i in 0..2 {
                let r = i * 4 + k;
                assert_eq!(x0.row(r), vids[i].blocks.row(k));
                for j in 0..2 {
                    assert!((ctx.hist_mean[[r, j]] - c.hist_mean[[i, j]]).abs() < 1e-12);
                }
                assert_eq!(ctx.hist_last.row(r), c.hist_last.row(i));
                assert_eq!(ctx.has_hist[r], k > 0);
            }
        }
    }

    #[test]
    fn attach_rejects_geometry_mismatch() {
        let (_, p) = StudentField::init(&small(), &mut stream(11, &[])).unwrap();
        let mut other = small();
        other.hidden = 32;
        assert!(matches!(StudentField::attach(&other, &p), Err(Error::Load(_))));
        assert!(StudentField::attach(&small(), &p).is_ok());
    }
}
