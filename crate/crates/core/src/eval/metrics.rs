//! Distribution and dynamics metrics.

use ndarray::Array1;

use crate::autodiff::Mat;
use crate::error::{Error, Result};
use crate::rng::{normal, Rng};
use crate::student::{flatten_videos, Video};
use crate::teacher::Oscillator;

/// Wasserstein-1 between two empirical distributions on the line, by
/// integrating the gap between their quantile functions.
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    if n == m {
        return a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / n as f64;
    }
    let (mut i, mut j) = (0, 0);
    let mut q = 0.0;
    let mut total = 0.0;
    while i < n && j < m {
        let qa = (i + 1) as f64 / n as f64;
        let qb = (j + 1) as f64 / m as f64;
        let next = qa.min(qb);
        total += (next - q) * (a[i] - b[j]).abs();
        q = next;
        if qa <= next {
            i += 1;
        }
        if qb <= next {
            j += 1;
        }
    }
    total
}

/// Mean over `projections` random unit directions of the 1-D Wasserstein-1
/// distance between projected samples (rows are samples).
pub fn sliced_wasserstein(a: &Mat, b: &Mat, projections: usize, rng: &mut Rng) -> Result<f64> {
    if a.nrows() == 0 || b.nrows() == 0 {
        return Err(Error::Input("sliced_wasserstein: empty sample set".into()));
    }
    if a.ncols() != b.ncols() {
        return Err(Error::Input(format!(
            "sliced_wasserstein: dimensions {} and {} differ",
            a.ncols(),
            b.ncols()
        )));
    }
    if projections == 0 {
        return Err(Error::Input("sliced_wasserstein: need at least one projection".into()));
    }
    let d = a.ncols();
    let mut total = 0.0;
    for _ in 0..projections {
        let mut u = Array1::from_shape_fn(d, |_| normal(rng));
        let norm = u.dot(&u).sqrt();
        u /= norm;
        let pa = a.dot(&u);
        let pb = b.dot(&u);
        total += wasserstein_1d(pa.as_slice().expect("contiguous"), pb.as_slice().expect("contiguous"));
    }
    Ok(total / projections as f64)
}

/// Sliced distance per prompt on flattened videos, averaged over the prompts
/// present in both sets.
pub fn prompt_sliced_wasserstein(a: &[Video], b: &[Video], projections: usize, rng: &mut Rng) -> Result<f64> {
    let mut prompts: Vec<usize> = a.iter().map(|v| v.prompt).collect();
    prompts.sort_unstable();
    prompts.dedup();
    let mut total = 0.0;
    let mut count = 0;
    for p in prompts {
        let xa: Vec<Video> = a.iter().filter(|v| v.prompt == p).cloned().collect();
        let xb: Vec<Video> = b.iter().filter(|v| v.prompt == p).cloned().collect();
        if xb.is_empty() {
            continue;
        }
        total += sliced_wasserstein(&flatten_videos(&xa), &flatten_videos(&xb), projections, rng)?;
        count += 1;
    }
    if count == 0 {
        return Err(Error::Input("prompt_sliced_wasserstein: no shared prompts".into()));
    }
    Ok(total / count as f64)
}

/// Mean squared violation of `s_{k+1} = A s_k` over consecutive blocks and
/// coordinates.
pub fn physics_residual(video: &Video, dynamics: &Oscillator) -> Result<f64> {
    if video.dim() != 2 {
        return Err(Error::Input(format!("physics_residual: expected 2-d blocks, got {}", video.dim())));
    }
    let k = video.num_blocks();
    if k < 2 {
        return Ok(0.0);
    }
    let b = &video.blocks;
    let mut total = 0.0;
    for i in 1..k {
        let pred = dynamics.step(&[b[[i - 1, 0]], b[[i - 1, 1]]]);
        total += (b[[i, 0]] - pred[0]).powi(2) + (b[[i, 1]] - pred[1]).powi(2);
    }
    Ok(total / (2 * (k - 1)) as f64)
}

/// Average residual over a set of videos, each under its prompt's dynamics.
pub fn mean_physics_residual(videos: &[Video], dynamics: impl Fn(usize) -> Oscillator) -> Result<f64> {
    if videos.is_empty() {
        return Err(Error::Input("physics_residual: no videos".into()));
    }
    let mut total = 0.0;
    for v in videos {
        total += physics_residual(v, &dynamics(v.prompt))?;
    }
    Ok(total / videos.len() as f64)
}
