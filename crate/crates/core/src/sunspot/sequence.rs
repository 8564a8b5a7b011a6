//! Anchor sequences: long orbits of the anchor map `y ↦ w(y)` with small jumps.
//!
//! The map has no fixed point, but its steps may shrink geometrically so that
//! the orbit converges without accumulating much drift. When that happens the
//! orbit is restarted from the limit point; each restart costs the distance
//! between the last image and the limit.

use std::collections::{HashMap, VecDeque};

use serde::Serialize;

use crate::block::{build_block, BuildingBlock};
use crate::error::{Error, Result};
use crate::geometry::{snap_small, FeasibleSet};
use crate::lcp::nontrivial_zero_solution;
use crate::linalg::sup_dist;

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitOptions {
    /// Steps whose drifts are summed to detect convergence.
    pub window: usize,
    /// Window sums below this mean the orbit has converged.
    pub cauchy_tolerance: f64,
    /// Drifts below this count as standing still.
    pub fixed_point_tolerance: f64,
    /// Consecutive standstills that identify a fixed point.
    pub fixed_point_repeats: usize,
    pub max_steps: usize,
    /// Image coordinates at most this large are set to zero before the next step.
    pub zero_snap: f64,
    /// Limit coordinates at most this large are set to zero after a restart.
    pub limit_zero_snap: f64,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        OrbitOptions {
            window: 10,
            cauchy_tolerance: 1e-7,
            fixed_point_tolerance: 1e-10,
            fixed_point_repeats: 3,
            max_steps: 10_000_000,
            zero_snap: 1e-12,
            limit_zero_snap: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Orbit {
    pub points: Vec<Vec<f64>>,
    pub images: Vec<Vec<f64>>,
    /// `Σ ‖x^k - f(x^k)‖_∞`.
    pub drift_sum: f64,
    /// `Σ ‖x^{k+1} - f(x^k)‖_∞`.
    pub jump_sum: f64,
    pub limit_jumps: usize,
}

/// Follows `x ↦ f(x)` from `x0` until the accumulated drift exceeds `drift_target`,
/// keeping the accumulated jumps below `jump_budget`.
pub fn approximate_orbit<F>(mut f: F, x0: &[f64], drift_target: f64, jump_budget: f64, opts: &OrbitOptions) -> Result<Orbit>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut orbit = Orbit { points: Vec::new(), images: Vec::new(), drift_sum: 0.0, jump_sum: 0.0, limit_jumps: 0 };
    let mut x = x0.to_vec();
    let mut window: VecDeque<f64> = VecDeque::with_capacity(opts.window + 1);
    let mut still = 0;
    for _ in 0..opts.max_steps {
        let fx = f(&x)?;
        let d = sup_dist(&x, &fx);
        orbit.points.push(x.clone());
        orbit.images.push(fx.clone());
        orbit.drift_sum += d;
        if orbit.drift_sum > drift_target {
            return Ok(orbit);
        }
        if d < opts.fixed_point_tolerance {
            still += 1;
            if still >= opts.fixed_point_repeats {
                return Err(Error::StationaryPathApplies);
            }
        } else {
            still = 0;
        }
        let prev = window.back().copied();
        window.push_back(d);
        if window.len() > opts.window {
            window.pop_front();
        }
        let mut next = fx.clone();
        let snapped = snap_small(&mut next, opts.zero_snap);
        if window.len() == opts.window && window.iter().sum::<f64>() < opts.cauchy_tolerance {
            let ratio = match prev {
                Some(p) if p > 0.0 => (d / p).clamp(0.0, 0.99),
                _ => 0.0,
            };
            let factor = ratio / (1.0 - ratio);
            let mut limit: Vec<f64> = fx.iter().zip(&x).map(|(a, b)| a + (a - b) * factor).collect();
            snap_small(&mut limit, opts.limit_zero_snap);
            orbit.jump_sum += sup_dist(&limit, &fx);
            next = limit;
            window.clear();
            orbit.limit_jumps += 1;
        } else {
            orbit.jump_sum += snapped;
        }
        if orbit.jump_sum >= jump_budget {
            return Err(Error::Sequence(format!(
                "accumulated jumps {} reached the budget {jump_budget} after {} steps",
                orbit.jump_sum,
                orbit.points.len()
            )));
        }
        x = next;
    }
    Err(Error::Sequence(format!(
        "drift {} still below {drift_target} after {} steps",
        orbit.drift_sum, opts.max_steps
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnchorSequence {
    pub eps: f64,
    /// `y^1, …, y^K`.
    pub points: Vec<Vec<f64>>,
    /// Building block at each `y^k`; `blocks[k].w` is `w(y^k)`.
    pub blocks: Vec<BuildingBlock>,
    pub drift_sum: f64,
    pub jump_sum: f64,
    /// Drift the sequence must exceed: `C(n, 2) · 2(1 + ε) / ε²`.
    pub drift_target: f64,
    /// Bound on the jumps: `ε`.
    pub jump_budget: f64,
    pub limit_jumps: usize,
}

impl AnchorSequence {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Recomputes both sums from the stored points and blocks.
    pub fn recomputed_sums(&self) -> (f64, f64) {
        let drift = self.blocks.iter().map(BuildingBlock::drift).sum();
        let jump = self
            .points
            .windows(2)
            .zip(&self.blocks)
            .map(|(p, b)| sup_dist(&p[1], &b.w))
            .sum();
        (drift, jump)
    }

    /// Total drift above the target and total jumps below the budget.
    pub fn satisfies_conditions(&self) -> bool {
        let (drift, jump) = self.recomputed_sums();
        drift > self.drift_target && jump < self.jump_budget
    }
}

pub fn drift_target(n: usize, eps: f64) -> f64 {
    let pairs = (n * n.saturating_sub(1) / 2) as f64;
    pairs * 2.0 * (1.0 + eps) / (eps * eps)
}

fn key(y: &[f64]) -> Vec<u64> {
    y.iter().map(|v| (v + 0.0).to_bits()).collect()
}

/// Anchor sequence from the lexicographically smallest point of `D`.
pub fn generate_sequence(d: &FeasibleSet, eps: f64) -> Result<AnchorSequence> {
    let start = d
        .lexicographic_min()
        .ok_or_else(|| Error::Sequence("D is empty".into()))?;
    generate_sequence_from(d, &start, eps, &OrbitOptions::default())
}

/// Anchor sequence from a given boundary point.
pub fn generate_sequence_from(d: &FeasibleSet, start: &[f64], eps: f64, opts: &OrbitOptions) -> Result<AnchorSequence> {
    if nontrivial_zero_solution(&d.matrix())?.is_some() {
        return Err(Error::StationaryPathApplies);
    }
    let mut cache: HashMap<Vec<u64>, BuildingBlock> = HashMap::new();
    let target = drift_target(d.n_vertices(), eps);
    let orbit = approximate_orbit(
        |y| {
            let k = key(y);
            if let Some(b) = cache.get(&k) {
                return Ok(b.w.clone());
            }
            let b = build_block(d, y, eps)?;
            let w = b.w.clone();
            cache.insert(k, b);
            Ok(w)
        },
        start,
        target,
        eps,
        opts,
    )?;
    let blocks = orbit
        .points
        .iter()
        .map(|y| cache[&key(y)].clone())
        .collect();
    Ok(AnchorSequence {
        eps,
        points: orbit.points,
        blocks,
        drift_sum: orbit.drift_sum,
        jump_sum: orbit.jump_sum,
        drift_target: target,
        jump_budget: eps,
        limit_jumps: orbit.limit_jumps,
    })
}
