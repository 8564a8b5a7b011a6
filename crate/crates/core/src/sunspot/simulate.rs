//! Monte-Carlo simulation of sunspot profiles.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::mmatrix::RecurrentProfile;
use super::profile::{stage_prob, SunspotProfile};
use crate::error::Result;
use crate::game::{singleton, QuittingGame, Subset};
use crate::stats::{chunked_runs, Estimate, VecAccumulator};

/// Runs still going after this many stages are scored `r^∅`.
pub const DEFAULT_MAX_STAGES: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBucket {
    /// Stages `from..=to`.
    pub from: u64,
    pub to: u64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub estimate: Estimate,
    pub terminated: u64,
    pub terminated_fraction: f64,
    /// Termination stages in power-of-two buckets.
    pub histogram: Vec<HistogramBucket>,
}

struct Tally {
    acc: VecAccumulator,
    terminated: u64,
    buckets: [u64; 64],
}

/// Stage (0-based, relative to the block start) at which a per-stage event of
/// probability `p` first occurs, if it does within `len` stages.
fn first_event(rng: &mut ChaCha8Rng, p: f64, len: u64) -> Option<u64> {
    if p <= 0.0 {
        return None;
    }
    let u: f64 = 1.0 - rng.random::<f64>();
    let k = (u.ln() / f64::ln_1p(-p)).floor();
    (k < len as f64).then_some(k as u64)
}

fn draw(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let mut u: f64 = rng.random::<f64>() * weights.iter().sum::<f64>();
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

fn run<F>(game: &QuittingGame, seed: u64, runs: u64, trial: F) -> SimulationReport
where
    F: Fn(&mut ChaCha8Rng) -> (Option<Subset>, u64) + Sync,
{
    let n = game.n_players();
    let tally = chunked_runs(
        seed,
        runs,
        || Tally { acc: VecAccumulator::new(n), terminated: 0, buckets: [0; 64] },
        |rng, t| match trial(rng) {
            (Some(s), stage) => {
                t.acc.push(game.payoff(s));
                t.terminated += 1;
                t.buckets[63 - stage.max(1).leading_zeros() as usize] += 1;
            }
            (None, _) => t.acc.push(game.never_quit()),
        },
        |total, part| {
            total.acc.merge(&part.acc);
            total.terminated += part.terminated;
            for (a, b) in total.buckets.iter_mut().zip(part.buckets) {
                *a += b;
            }
        },
    );
    let histogram = tally
        .buckets
        .iter()
        .enumerate()
        .filter(|(_, c)| **c > 0)
        .map(|(b, &count)| HistogramBucket { from: 1 << b, to: (1u64 << b).saturating_mul(2) - 1, count })
        .collect();
    SimulationReport {
        estimate: Estimate::from_accumulator(&tally.acc),
        terminated: tally.terminated,
        terminated_fraction: tally.terminated as f64 / runs.max(1) as f64,
        histogram,
    }
}

/// Plays the kiloblock profile `runs` times; stages are counted from 1.
pub fn simulate_profile(profile: &SunspotProfile, game: &QuittingGame, seed: u64, runs: u64, max_stages: u64) -> Result<SimulationReport> {
    profile.validate(game)?;
    let probs: Vec<Vec<f64>> = profile
        .kiloblocks
        .iter()
        .map(|kb| kb.lambda.iter().map(|&l| stage_prob(l, kb.block_len)).collect())
        .collect();
    Ok(run(game, seed, runs, |rng| {
        let mut stage = 0u64;
        for (kb, p) in profile.kiloblocks.iter().zip(&probs) {
            loop {
                if stage >= max_stages {
                    return (None, stage);
                }
                let t = draw(rng, &kb.z);
                if t == 0 {
                    stage += 1;
                    break;
                }
                let j = t - 1;
                if let Some(k) = first_event(rng, p[j], kb.block_len) {
                    return (Some(singleton(profile.players[j])), stage + k + 1);
                }
                stage += kb.block_len;
            }
        }
        (None, stage)
    }))
}

/// Plays the recurrent profile `runs` times.
pub fn simulate_recurrent(profile: &RecurrentProfile, game: &QuittingGame, seed: u64, runs: u64, max_stages: u64) -> Result<SimulationReport> {
    profile.validate(game)?;
    let probs: Vec<f64> = profile.nodes.iter().map(|nd| stage_prob(nd.alpha, nd.block_len)).collect();
    Ok(run(game, seed, runs, |rng| {
        let mut stage = 0u64;
        let mut node = draw(rng, &profile.initial);
        while stage < max_stages {
            let nd = &profile.nodes[node];
            if let Some(k) = first_event(rng, probs[node], nd.block_len) {
                return (Some(singleton(profile.players[nd.quitter])), stage + k + 1);
            }
            stage += nd.block_len;
            node = draw(rng, &nd.next);
        }
        (None, stage)
    }))
}
