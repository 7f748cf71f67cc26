//! Random streams, parallel fan-out and deterministic reductions.
//!
//! Every path owns one ChaCha8 stream selected by `(seed, path index)`; the
//! word position is derived from the step index, so the normals drawn at step
//! `k` of path `i` depend on `(seed, i, k)` only. Fan-out results are
//! collected in path order and summed pairwise, which keeps every reported
//! number independent of the worker count.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counter-addressed normal generator for one path.
#[derive(Debug, Clone)]
pub struct PathStream {
    rng: ChaCha8Rng,
    words_per_step: u128,
}

impl PathStream {
    /// `dim` normals are drawn per step.
    pub fn new(seed: u64, path: u64, dim: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path);
        // one Box–Muller pair consumes two u64 draws, i.e. four 32-bit words
        let pairs = dim.div_ceil(2) as u128;
        PathStream {
            rng,
            words_per_step: 4 * pairs,
        }
    }

    /// Fills `out` with independent `N(0, scale²)` draws for step `step`.
    pub fn normals(&mut self, step: u64, scale: f64, out: &mut [f64]) {
        self.rng.set_word_pos(step as u128 * self.words_per_step);
        for chunk in out.chunks_mut(2) {
            let (z0, z1) = self.box_muller();
            chunk[0] = scale * z0;
            if chunk.len() > 1 {
                chunk[1] = scale * z1;
            }
        }
    }

    fn box_muller(&mut self) -> (f64, f64) {
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        (r * c, r * s)
    }
}

/// Runs `f(i)` for `i in 0..count` on `workers` threads (0 = all cores)
/// and returns the results in index order.
///
/// When several paths fail, the error of the smallest index is reported.
pub fn map_paths<T, F>(count: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Argument(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<T>> = pool.install(|| {
        (0..count as u64)
            .into_par_iter()
            .map(|i| f(i).map_err(|e| e.at_path(i)))
            .collect()
    });
    results.into_iter().collect()
}

/// Pairwise summation with a fixed split order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { mean: value, se: 0.0, n: 0 }
    }

    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let m = mean(xs);
        let se = if n > 1 {
            let dev: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
            (pairwise_sum(&dev) / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        Estimate { mean: m, se, n }
    }

    /// Mean of `xs` with the standard error of the influence samples `z`.
    pub(crate) fn with_influence(mean: f64, z: &[f64]) -> Self {
        let mut e = Estimate::from_samples(z);
        e.mean = mean;
        e
    }

    /// Whether `target` lies within `k` standard errors (plus `extra`).
    pub fn covers(&self, target: f64, k: f64, extra: f64) -> bool {
        (self.mean - target).abs() <= k * self.se + extra
    }
}
