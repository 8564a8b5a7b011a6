//! Seeded, chunked Monte-Carlo plumbing shared by the simulators.
//!
//! Runs are split into a fixed number of chunks, each with its own ChaCha
//! stream derived from the seed. Chunks may execute on any thread; they are
//! merged in index order, so results are bit-identical for a given seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

const CHUNKS: u64 = 64;

/// Running sums of a vector-valued sample.
#[derive(Debug, Clone, PartialEq)]
pub struct VecAccumulator {
    pub count: u64,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl VecAccumulator {
    pub fn new(dim: usize) -> Self {
        VecAccumulator {
            count: 0,
            sum: vec![0.0; dim],
            sum_sq: vec![0.0; dim],
        }
    }

    pub fn push(&mut self, sample: &[f64]) {
        self.count += 1;
        for ((s, q), x) in self.sum.iter_mut().zip(self.sum_sq.iter_mut()).zip(sample) {
            *s += x;
            *q += x * x;
        }
    }

    pub fn merge(&mut self, other: &VecAccumulator) {
        self.count += other.count;
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += b;
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.count.max(1) as f64;
        self.sum.iter().map(|s| s / n).collect()
    }

    /// Standard error of the mean per coordinate.
    pub fn std_error(&self) -> Vec<f64> {
        if self.count < 2 {
            return vec![0.0; self.sum.len()];
        }
        let n = self.count as f64;
        self.sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(s, q)| {
                let mean = s / n;
                let var = ((q / n) - mean * mean).max(0.0) * n / (n - 1.0);
                (var / n).sqrt()
            })
            .collect()
    }
}

/// Summary of a Monte-Carlo estimate of a payoff vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub runs: u64,
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
}

impl Estimate {
    pub fn from_accumulator(acc: &VecAccumulator) -> Self {
        Estimate {
            runs: acc.count,
            mean: acc.mean(),
            std_error: acc.std_error(),
        }
    }

    /// Whether `exact` lies within `k` standard errors of the mean in every coordinate.
    ///
    /// A floor of `1e-12` on the standard error covers deterministic outcomes.
    pub fn agrees_with(&self, exact: &[f64], k: f64) -> bool {
        self.mean
            .iter()
            .zip(&self.std_error)
            .zip(exact)
            .all(|((m, se), e)| (m - e).abs() <= k * se.max(1e-12))
    }
}

/// Runs `runs` independent trials in deterministic chunks and merges per-chunk state.
pub fn chunked_runs<S, F, M>(seed: u64, runs: u64, init: impl Fn() -> S + Sync, trial: F, merge: M) -> S
where
    S: Send,
    F: Fn(&mut ChaCha8Rng, &mut S) + Sync,
    M: Fn(&mut S, S),
{
    let chunks = CHUNKS.min(runs.max(1));
    let per = runs / chunks;
    let extra = runs % chunks;
    let parts: Vec<S> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let mut state = init();
            let n = per + u64::from(c < extra);
            for _ in 0..n {
                trial(&mut rng, &mut state);
            }
            state
        })
        .collect();
    let mut total = init();
    for p in parts {
        merge(&mut total, p);
    }
    total
}
