//! Prompt-conditioned video scorer, its pairwise and binary losses, and the
//! advantage pipeline that turns scores into per-rollout weights.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::autodiff::{log_logistic, logistic, AdamW, Bound, Mat, ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::nn::{expect_param, one_hot, Activation, Mlp};
use crate::rng::{normal, Rng};
use crate::student::{flatten_videos, BlockEncoder, Video};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DiscLoss {
    #[default]
    Bt,
    Gan,
}

impl DiscLoss {
    pub fn name(self) -> &'static str {
        match self {
            DiscLoss::Bt => "bt",
            DiscLoss::Gan => "gan",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscGeometry {
    pub blocks: usize,
    pub dim: usize,
    pub prompts: usize,
    pub enc_width: usize,
    pub prompt_width: usize,
    pub hidden: usize,
    pub layers: usize,
}

impl Default for DiscGeometry {
    fn default() -> Self {
        Self {
            blocks: 8,
            dim: 2,
            prompts: 8,
            enc_width: 16,
            prompt_width: 8,
            hidden: 64,
            layers: 2,
        }
    }
}

impl DiscGeometry {
    pub fn validate(&self) -> Result<()> {
        if [self.blocks, self.dim, self.prompts, self.enc_width, self.hidden]
            .contains(&0)
        {
            return Err(Error::Config("discriminator geometry fields must be positive".into()));
        }
        Ok(())
    }

    pub fn tag(&self) -> String {
        format!(
            "K={},d={},P={},E={},Pe={},H={},L={}",
            self.blocks, self.dim, self.prompts, self.enc_width, self.prompt_width, self.hidden, self.layers
        )
    }

    fn mlp_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.blocks * self.enc_width + self.prompt_width];
        sizes.extend(std::iter::repeat_n(self.hidden, self.layers));
        sizes.push(1);
        sizes
    }
}

/// `D(x_0, y)`: per-block affine encodings of all blocks, concatenated with a
/// prompt embedding, through an MLP to a scalar logit.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    pub geom: DiscGeometry,
    encoder: BlockEncoder,
    prompt_emb: ParamId,
    mlp: Mlp,
}

impl Discriminator {
    pub fn init(geom: &DiscGeometry, rng: &mut Rng) -> Result<(Self, ParamStore)> {
        geom.validate()?;
        let mut store = ParamStore::new();
        let encoder = BlockEncoder::init(&mut store, "enc", geom.dim, geom.enc_width, rng)?;
        let prompt_emb = store.add(
            "prompt_emb",
            crate::autodiff::glorot(geom.prompts, geom.prompt_width, rng),
        )?;
        let mlp = Mlp::init(&mut store, "score", &geom.mlp_sizes(), Activation::Silu, rng)?;
        store.set_meta("kind", "discriminator");
        store.set_meta("geometry", geom.tag());
        Ok((
            Self {
                geom: geom.clone(),
                encoder,
                prompt_emb,
                mlp,
            },
            store,
        ))
    }

    pub fn attach(geom: &DiscGeometry, store: &ParamStore) -> Result<Self> {
        geom.validate()?;
        if let Some(tag) = store.meta().get("geometry") {
            if tag != &geom.tag() {
                return Err(Error::Load(format!(
                    "discriminator geometry `{tag}` does not match configured `{}`",
                    geom.tag()
                )));
            }
        }
        Ok(Self {
            geom: geom.clone(),
            encoder: BlockEncoder::attach(store, "enc", geom.dim, geom.enc_width)?,
            prompt_emb: expect_param(store, "prompt_emb", (geom.prompts, geom.prompt_width))?,
            mlp: Mlp::attach(store, "score", &geom.mlp_sizes(), Activation::Silu)?,
        })
    }

    /// Logits (n x 1) for flattened videos given as a tape node (n x K·d).
    pub fn logits_var(&self, tape: &mut Tape, params: &Bound, flat: Var, prompts: &[usize]) -> Result<Var> {
        let (n, width) = tape.shape(flat);
        let (k, d, e) = (self.geom.blocks, self.geom.dim, self.geom.enc_width);
        if width != k * d || n != prompts.len() {
            return Err(Error::Input(format!(
                "discriminator: got {n}x{width} videos for {} prompts, expected width {}",
                prompts.len(),
                k * d
            )));
        }
        let per_block = tape.reshape(flat, n * k, d)?;
        let enc = self.encoder.forward(tape, params, per_block)?;
        let enc = tape.reshape(enc, n, k * e)?;
        let oh = tape.constant(one_hot(prompts, self.geom.prompts)?)?;
        let p = tape.matmul(oh, params.var(self.prompt_emb))?;
        let input = tape.concat(&[enc, p])?;
        self.mlp.forward(tape, params, input)
    }

    pub fn logits(&self, tape: &mut Tape, params: &Bound, videos: &[Video]) -> Result<Var> {
        let flat = tape.constant(flatten_videos(videos))?;
        let prompts: Vec<usize> = videos.iter().map(|v| v.prompt).collect();
        self.logits_var(tape, params, flat, &prompts)
    }

    /// Graph-free scores.
    pub fn scores(&self, params: &ParamStore, videos: &[Video]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let bound = tape.bind_frozen(params)?;
        let l = self.logits(&mut tape, &bound, videos)?;
        Ok(tape.value(l).iter().copied().collect())
    }

    /// The raw logit, read as an estimate of `log(π_T / π_θ)` up to a
    /// constant.
    pub fn log_ratio(&self, params: &ParamStore, video: &Video) -> Result<f64> {
        Ok(self.scores(params, std::slice::from_ref(video))?[0])
    }
}

fn check_pairs(teacher: &[Video], student: &[Video]) -> Result<()> {
    if teacher.is_empty() {
        return Err(Error::Input("empty discriminator batch".into()));
    }
    if teacher.len() != student.len() {
        return Err(Error::Input(format!(
            "{} teacher videos but {} student videos",
            teacher.len(),
            student.len()
        )));
    }
    if let Some(i) = (0..teacher.len()).find(|&i| teacher[i].prompt != student[i].prompt) {
        return Err(Error::Input(format!(
            "pair {i} mixes prompts {} and {}",
            teacher[i].prompt, student[i].prompt
        )));
    }
    Ok(())
}

/// `mean −log σ(D(x_T, y) − D(x̂, y))` over prompt-matched pairs.
pub fn bt_loss(tape: &mut Tape, params: &Bound, disc: &Discriminator, teacher: &[Video], student: &[Video]) -> Result<Var> {
    check_pairs(teacher, student)?;
    let lt = disc.logits(tape, params, teacher)?;
    let ls = disc.logits(tape, params, student)?;
    let margin = tape.sub(lt, ls)?;
    let ll = tape.log_sigmoid(margin)?;
    let m = tape.mean(ll)?;
    tape.scale(m, -1.0)
}

/// Mean binary cross-entropy with teacher videos labelled 1 and student
/// videos labelled 0.
pub fn gan_loss(tape: &mut Tape, params: &Bound, disc: &Discriminator, teacher: &[Video], student: &[Video]) -> Result<Var> {
    if teacher.is_empty() && student.is_empty() {
        return Err(Error::Input("empty discriminator batch".into()));
    }
    let mut terms = Vec::new();
    if !teacher.is_empty() {
        let lt = disc.logits(tape, params, teacher)?;
        terms.push(tape.log_sigmoid(lt)?);
    }
    if !student.is_empty() {
        let ls = disc.logits(tape, params, student)?;
        let neg = tape.scale(ls, -1.0)?;
        terms.push(tape.log_sigmoid(neg)?);
    }
    let n = (teacher.len() + student.len()) as f64;
    let mut total = tape.sum(terms[0])?;
    if terms.len() == 2 {
        let s = tape.sum(terms[1])?;
        total = tape.add(total, s)?;
    }
    tape.scale(total, -1.0 / n)
}

/// Scalar versions on raw logits.
pub fn bt_loss_value(teacher_logits: &[f64], student_logits: &[f64]) -> f64 {
    let n = teacher_logits.len() as f64;
    -teacher_logits
        .iter()
        .zip(student_logits)
        .map(|(t, s)| log_logistic(t - s))
        .sum::<f64>()
        / n
}

pub fn gan_loss_value(logits: &[f64], labels: &[bool]) -> f64 {
    let n = logits.len() as f64;
    -logits
        .iter()
        .zip(labels)
        .map(|(&l, &y)| if y { log_logistic(l) } else { log_logistic(-l) })
        .sum::<f64>()
        / n
}

/// Discriminator loss under the selected objective.
pub fn disc_loss(
    tape: &mut Tape,
    params: &Bound,
    disc: &Discriminator,
    kind: DiscLoss,
    teacher: &[Video],
    student: &[Video],
) -> Result<Var> {
    match kind {
        DiscLoss::Bt => bt_loss(tape, params, disc, teacher, student),
        DiscLoss::Gan => {
            check_pairs(teacher, student)?;
            gan_loss(tape, params, disc, teacher, student)
        }
    }
}

/// One optimizer step on the discriminator loss. Returns `(loss before the
/// step, pre-clip gradient norm)`.
pub fn disc_step(
    disc: &Discriminator,
    params: &mut ParamStore,
    opt: &mut AdamW,
    kind: DiscLoss,
    teacher: &[Video],
    student: &[Video],
) -> Result<(f64, f64)> {
    let mut tape = Tape::new();
    let bound = tape.bind(params)?;
    let loss = disc_loss(&mut tape, &bound, disc, kind, teacher, student)?;
    let value = tape.scalar(loss);
    let grads = bound.collect(&tape.backward(loss)?);
    let norm = opt.step(params, &grads)?;
    Ok((value, norm))
}

/// Copies of `videos` with i.i.d. `N(0, σ²)` added to every entry; used on
/// discriminator inputs only.
pub fn jitter(videos: &[Video], sigma: f64, rng: &mut Rng) -> Vec<Video> {
    if sigma == 0.0 {
        return videos.to_vec();
    }
    videos
        .iter()
        .map(|v| {
            let mut out = v.clone();
            out.blocks.mapv_inplace(|x| x + sigma * normal(rng));
            out
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Advantages

/// One rollout's reward bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Advantage {
    pub score: f64,
    pub baseline: f64,
    pub raw: f64,
    /// Normalized then clipped advantage.
    pub clipped: f64,
    pub weight: f64,
}

/// Baseline per rollout: the mean score over rollouts with the same prompt
/// when the prompt occurs at least twice, else the whole-batch mean.
pub fn baselines(scores: &[f64], prompts: &[usize]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::Input("advantage: empty batch".into()));
    }
    if scores.len() != prompts.len() {
        return Err(Error::Input("advantage: one prompt per score".into()));
    }
    let batch_mean = scores.iter().sum::<f64>() / scores.len() as f64;
    let mut groups: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for (&s, &p) in scores.iter().zip(prompts) {
        let e = groups.entry(p).or_insert((0.0, 0));
        e.0 += s;
        e.1 += 1;
    }
    Ok(prompts
        .iter()
        .map(|p| {
            let (sum, n) = groups[p];
            if n >= 2 {
                sum / n as f64
            } else {
                batch_mean
            }
        })
        .collect())
}

/// Bias-corrected exponential moving estimate of a second moment.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct Moment {
    acc: f64,
    mass: f64,
    count: u64,
}

impl Moment {
    fn push(&mut self, x2: f64, decay: f64) {
        self.acc = decay * self.acc + (1.0 - decay) * x2;
        self.mass = decay * self.mass + (1.0 - decay);
        self.count += 1;
    }

    fn value(&self) -> Option<f64> {
        (self.mass > 0.0).then(|| self.acc / self.mass)
    }
}

/// Running advantage scale, tracked per prompt with a global fallback for
/// prompts that have fewer than `min_count` observations.
#[derive(Debug, Clone, PartialEq)]
pub struct StdTracker {
    pub decay: f64,
    pub min_count: u64,
    pub floor: f64,
    global: Moment,
    per_prompt: Vec<Moment>,
}

impl StdTracker {
    pub fn new(prompts: usize) -> Self {
        Self {
            decay: 0.99,
            min_count: 10,
            floor: 1e-6,
            global: Moment::default(),
            per_prompt: vec![Moment::default(); prompts],
        }
    }

    pub fn observe(&mut self, prompt: usize, raw: f64) -> Result<()> {
        let m = self
            .per_prompt
            .get_mut(prompt)
            .ok_or_else(|| Error::Input(format!("advantage tracker: unknown prompt {prompt}")))?;
        m.push(raw * raw, self.decay);
        self.global.push(raw * raw, self.decay);
        Ok(())
    }

    pub fn std(&self, prompt: usize) -> f64 {
        let local = self.per_prompt.get(prompt).filter(|m| m.count >= self.min_count);
        let var = local
            .and_then(Moment::value)
            .or_else(|| self.global.value())
            .unwrap_or(1.0);
        var.sqrt().max(self.floor)
    }

    pub fn global_std(&self) -> f64 {
        self.global.value().unwrap_or(1.0).sqrt().max(self.floor)
    }

    pub fn observations(&self, prompt: usize) -> u64 {
        self.per_prompt.get(prompt).map_or(0, |m| m.count)
    }

    /// Serialize into a `(P + 1) x 3` matrix; the last row is the global state.
    pub fn to_matrix(&self) -> Mat {
        let rows = self.per_prompt.iter().chain(std::iter::once(&self.global));
        let mut m = Mat::zeros((self.per_prompt.len() + 1, 3));
        for (i, s) in rows.enumerate() {
            m[[i, 0]] = s.acc;
            m[[i, 1]] = s.mass;
            m[[i, 2]] = s.count as f64;
        }
        m
    }

    pub fn from_matrix(m: &Mat) -> Result<Self> {
        if m.ncols() != 3 || m.nrows() < 2 {
            return Err(Error::Load(format!("advantage tracker state has shape {:?}", m.dim())));
        }
        let read = |i: usize| Moment {
            acc: m[[i, 0]],
            mass: m[[i, 1]],
            count: m[[i, 2]] as u64,
        };
        let p = m.nrows() - 1;
        let mut t = Self::new(p);
        t.per_prompt = (0..p).map(read).collect();
        t.global = read(p);
        Ok(t)
    }
}

/// Advantages from given scores with a caller-supplied scale per prompt.
pub fn advantages_with_scale(
    scores: &[f64],
    prompts: &[usize],
    clip_max: f64,
    scale: impl Fn(usize) -> f64,
) -> Result<Vec<Advantage>> {
    if !(clip_max > 0.0) {
        return Err(Error::Config("advantage clip must be positive".into()));
    }
    let base = baselines(scores, prompts)?;
    Ok(scores
        .iter()
        .zip(&base)
        .zip(prompts)
        .map(|((&score, &baseline), &p)| {
            let raw = score - baseline;
            let clipped = (raw / scale(p)).clamp(-clip_max, clip_max);
            Advantage {
                score,
                baseline,
                raw,
                clipped,
                weight: logistic(clipped),
            }
        })
        .collect())
}

/// Full pipeline: baseline, update the scale tracker with this batch's raw
/// advantages, normalize, clip, and map to weights in `[0, 1]`.
pub fn advantages(scores: &[f64], prompts: &[usize], clip_max: f64, tracker: &mut StdTracker) -> Result<Vec<Advantage>> {
    let base = baselines(scores, prompts)?;
    for ((s, b), &p) in scores.iter().zip(&base).zip(prompts) {
        tracker.observe(p, s - b)?;
    }
    let snapshot = tracker.clone();
    advantages_with_scale(scores, prompts, clip_max, |p| snapshot.std(p))
}

/// Mean pairwise preference of rollouts over their teacher partners,
/// `mean σ(D(x̂) − D(x_T))`. Invariant to constant logit shifts.
pub fn mean_reward(teacher_scores: &[f64], student_scores: &[f64]) -> f64 {
    let n = student_scores.len().max(1) as f64;
    student_scores
        .iter()
        .zip(teacher_scores)
        .map(|(s, t)| logistic(s - t))
        .sum::<f64>()
        / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::grad_check;
    use crate::rng::{normal_matrix, stream};
    use crate::student::Source;
    use proptest::prelude::*;

    fn tiny() -> DiscGeometry {
        DiscGeometry {
            blocks: 3,
            dim: 2,
            prompts: 2,
            enc_width: 4,
            prompt_width: 2,
            hidden: 6,
            layers: 1,
        }
    }

    fn videos(n: usize, seed: u64, source: Source) -> Vec<Video> {
        let mut rng = stream(seed, &[]);
        (0..n)
            .map(|i| Video::new(normal_matrix(3, 2, &mut rng), i % 2, source).unwrap())
            .collect()
    }

    #[test]
    fn bt_values() {
        assert!((bt_loss_value(&[0.3], &[0.3]) - 2f64.ln()).abs() < 1e-15);
        assert!((bt_loss_value(&[2.0], &[0.0]) - 0.126_928_011_042_972_6).abs() < 1e-12);
        assert!(bt_loss_value(&[40.0], &[0.0]) < 1e-15);
        let mut prev = f64::INFINITY;
        for m in -10..10 {
            let l = bt_loss_value(&[m as f64 * 0.5], &[0.0]);
            assert!(l < prev);
            prev = l;
        }
    }

    #[test]
    fn gan_values() {
        assert!(gan_loss_value(&[20.0, -20.0], &[true, false]) < 1e-8);
        assert!((gan_loss_value(&[0.0, 0.0], &[true, false]) - 2f64.ln()).abs() < 1e-15);
        // logits 0 (teacher), 2 (teacher), −2 (student)
        let by_hand = (2f64.ln() + (1.0 + (-2f64).exp()).ln() + (1.0 + (-2f64).exp()).ln()) / 3.0;
        assert!((gan_loss_value(&[0.0, 2.0, -2.0], &[true, true, false]) - by_hand).abs() < 1e-14);
    }

    #[test]
    fn graph_losses_match_scalar_versions() {
        let (d, p) = Discriminator::init(&tiny(), &mut stream(1, &[])).unwrap();
        let t = videos(4, 2, Source::Teacher);
        let s = videos(4, 3, Source::Student);
        let (lt, ls) = (d.scores(&p, &t).unwrap(), d.scores(&p, &s).unwrap());
        let mut tape = Tape::new();
        let b = tape.bind(&p).unwrap();
        let bt = bt_loss(&mut tape, &b, &d, &t, &s).unwrap();
        let gan = gan_loss(&mut tape, &b, &d, &t, &s).unwrap();
        assert!((tape.scalar(bt) - bt_loss_value(&lt, &ls)).abs() < 1e-14);
        let all: Vec<f64> = lt.iter().chain(&ls).copied().collect();
        let labels: Vec<bool> = (0..8).map(|i| i < 4).collect();
        assert!((tape.scalar(gan) - gan_loss_value(&all, &labels)).abs() < 1e-14);
    }

    #[test]
    fn mismatched_pair_prompts_rejected() {
        let (d, p) = Discriminator::init(&tiny(), &mut stream(1, &[])).unwrap();
        let t = videos(2, 2, Source::Teacher);
        let mut s = videos(2, 3, Source::Student);
        s.swap(0, 1);
        let mut tape = Tape::new();
        let b = tape.bind(&p).unwrap();
        assert!(matches!(bt_loss(&mut tape, &b, &d, &t, &s), Err(Error::Input(_))));
    }

    #[test]
    fn disc_gradients_match() {
        let (d, p) = Discriminator::init(&tiny(), &mut stream(1, &[])).unwrap();
        let t = videos(4, 2, Source::Teacher);
        let s = videos(4, 3, Source::Student);
        for kind in [DiscLoss::Bt, DiscLoss::Gan] {
            let r = grad_check(|tape, b| disc_loss(tape, b, &d, kind, &t, &s), &p, 1e-5, 1e-4).unwrap();
            assert!(r.passed(), "{kind:?}: {r:?}");
        }
    }

    #[test]
    fn zero_rate_freezes_and_small_rate_descends() {
        let (d, p0) = Discriminator::init(&tiny(), &mut stream(1, &[])).unwrap();
        let t = videos(6, 2, Source::Teacher);
        let s = videos(6, 3, Source::Student);
        let mut p = p0.clone();
        let mut opt = AdamW::new(0.0, &p);
        disc_step(&d, &mut p, &mut opt, DiscLoss::Bt, &t, &s).unwrap();
        assert!(p.iter().zip(p0.iter()).all(|((_, a), (_, b))| a == b));

        let mut opt = AdamW::new(1e-4, &p);
        let (before, _) = disc_step(&d, &mut p, &mut opt, DiscLoss::Bt, &t, &s).unwrap();
        let after = bt_loss_value(&d.scores(&p, &t).unwrap(), &d.scores(&p, &s).unwrap());
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn advantage_examples() {
        let a = advantages_with_scale(&[2.0, 2.0, 2.0], &[0, 0, 1], 5.0, |_| 1.0).unwrap();
        assert!(a.iter().all(|x| x.raw == 0.0 && x.weight == 0.5));
        let a = advantages_with_scale(&[1.0, 3.0], &[4, 4], 5.0, |_| 1.0).unwrap();
        assert_eq!((a[0].raw, a[1].raw), (-1.0, 1.0));
        assert!((a[0].weight - 0.268_941_421_369_995_1).abs() < 1e-12);
        assert!((a[1].weight - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert!(advantages_with_scale(&[], &[], 5.0, |_| 1.0).is_err());
    }

    #[test]
    fn baseline_falls_back_to_batch_mean_for_singletons() {
        let b = baselines(&[1.0, 3.0, 8.0], &[0, 0, 1]).unwrap();
        assert_eq!(b, vec![2.0, 2.0, 4.0]);
    }

    #[test]
    fn tracker_uses_global_until_enough_observations() {
        let mut t = StdTracker::new(2);
        for _ in 0..9 {
            t.observe(0, 2.0).unwrap();
        }
        t.observe(1, 10.0).unwrap();
        let global = t.std(0);
        assert!(global > 2.0);
        t.observe(0, 2.0).unwrap();
        assert!((t.std(0) - 2.0).abs() < 1e-12);
        assert_eq!(t.observations(1), 1);
        assert_eq!(t.std(1), t.global_std());
        let back = StdTracker::from_matrix(&t.to_matrix()).unwrap();
        assert_eq!(back, t);
    }

    proptest! {
        #[test]
        fn advantages_invariants(
            scores in proptest::collection::vec(-50.0f64..50.0, 2..24),
            shift in -100.0f64..100.0,
            seed in 0u64..1000,
        ) {
            let prompts: Vec<usize> = (0..scores.len()).map(|i| (i as u64 * 7 + seed) as usize % 3).collect();
            let mut tr = StdTracker::new(3);
            let a = advantages(&scores, &prompts, 5.0, &mut tr).unwrap();
            let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
            let mut tr2 = StdTracker::new(3);
            let b = advantages(&shifted, &prompts, 5.0, &mut tr2).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((0.0..=1.0).contains(&x.weight));
                prop_assert!(x.clipped.abs() <= 5.0);
                prop_assert!((x.raw - y.raw).abs() < 1e-9 * (1.0 + shift.abs() + x.score.abs()));
            }
            // ranking within a prompt group
            for i in 0..a.len() {
                for j in 0..a.len() {
                    if prompts[i] == prompts[j] && a[i].score > a[j].score {
                        prop_assert!(a[i].weight >= a[j].weight);
                    }
                }
            }
        }

        #[test]
        fn bt_loss_shift_invariant(t in proptest::collection::vec(-5.0f64..5.0, 1..10), c in -20.0f64..20.0) {
            let s: Vec<f64> = t.iter().map(|x| x * 0.5 - 1.0).collect();
            let ts: Vec<f64> = t.iter().map(|x| x + c).collect();
            let ss: Vec<f64> = s.iter().map(|x| x + c).collect();
            prop_assert!((bt_loss_value(&t, &s) - bt_loss_value(&ts, &ss)).abs() < 1e-9);
        }
    }
}
