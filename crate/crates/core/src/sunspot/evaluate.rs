//! Exact payoffs, best-reply values, and termination probabilities of kiloblock profiles.

use serde::Serialize;

use super::profile::{Kiloblock, SunspotProfile};
use crate::error::Result;
use crate::game::{singleton, QuittingGame};
use crate::linalg::sup_dist;

/// Expected payoff vector (all players) by backward induction over kiloblocks.
pub fn exact_value(profile: &SunspotProfile, game: &QuittingGame) -> Result<Vec<f64>> {
    profile.validate(game)?;
    Ok(kiloblock_values(profile, game).swap_remove(0))
}

/// `values[k]` is the expected payoff on entering kiloblock `k`; the last entry is the tail.
fn kiloblock_values(profile: &SunspotProfile, game: &QuittingGame) -> Vec<Vec<f64>> {
    let n_players = game.n_players();
    let mut values = vec![game.never_quit().to_vec()];
    for kb in profile.kiloblocks.iter().rev() {
        let next = values.last().expect("tail");
        let den = kb.exit_weight();
        let v = if den <= 0.0 {
            game.never_quit().to_vec()
        } else {
            let mut acc: Vec<f64> = next.iter().map(|v| kb.z[0] * v).collect();
            for (j, &p) in profile.players.iter().enumerate() {
                let w = kb.z[1 + j] * kb.lambda[j];
                if w > 0.0 {
                    for (a, r) in acc.iter_mut().zip(game.unilateral(p)) {
                        *a += w * r;
                    }
                }
            }
            acc.iter().map(|a| a / den).collect()
        };
        debug_assert_eq!(v.len(), n_players);
        values.push(v);
    }
    values.reverse();
    values
}

/// Probability that somebody eventually quits. With `without = Some(j)`, normal
/// player `j` never quits and everybody else follows the profile.
pub fn termination_probability(profile: &SunspotProfile, without: Option<usize>) -> f64 {
    let mut survive = 1.0;
    for kb in &profile.kiloblocks {
        let quit = kb.quit_weight(without);
        let den = kb.z[0] + quit;
        if den > 0.0 {
            survive *= kb.z[0] / den;
        }
    }
    1.0 - survive
}

/// Value of a kiloblock to `player` as a function of its own continuation value `u`,
/// returned with the slope in `u`.
fn kiloblock_operator(kb: &Kiloblock, players: &[usize], game: &QuittingGame, player: usize, next: f64, u: f64) -> (f64, f64) {
    let alone = game.unilateral(player)[player];
    let mut value = kb.z[0] * alone.max(next);
    let mut slope = 0.0;
    for (j, &p) in players.iter().enumerate() {
        let zj = kb.z[1 + j];
        if zj == 0.0 {
            continue;
        }
        let q = kb.stage_prob(j);
        let (v, s) = if p == player || q == 0.0 {
            if u >= alone {
                (u, 1.0)
            } else {
                (alone, 0.0)
            }
        } else {
            let both = game.payoff(singleton(player) | singleton(p))[player];
            let other = game.unilateral(p)[player];
            let quit_now = q * both + (1.0 - q) * alone;
            let (mut c, mut s) = (u, 1.0);
            for _ in 0..kb.block_len {
                let stay = q * other + (1.0 - q) * c;
                if stay >= quit_now {
                    c = stay;
                    s *= 1.0 - q;
                } else {
                    c = quit_now;
                    s = 0.0;
                }
            }
            (c, s)
        };
        value += zj * v;
        slope += zj * s;
    }
    (value, slope)
}

/// Solves `u = T(u)` for one kiloblock: Newton's method, falling back to bisection.
fn kiloblock_best_reply(kb: &Kiloblock, players: &[usize], game: &QuittingGame, player: usize, next: f64, start: f64) -> f64 {
    let alone = game.unilateral(player)[player];
    // Weight of draws that neither end the kiloblock nor give the deviator a
    // choice other than waiting: if it is everything, the deviator can only
    // wait forever or quit alone.
    let trapped: f64 = players
        .iter()
        .enumerate()
        .filter(|&(j, &p)| p == player || kb.stage_prob(j) == 0.0)
        .map(|(j, _)| kb.z[1 + j])
        .sum();
    if trapped >= 1.0 - 1e-15 {
        return alone.max(game.never_quit()[player]);
    }
    let t = |u: f64| kiloblock_operator(kb, players, game, player, next, u);
    let mut u = start;
    for _ in 0..100 {
        let (v, s) = t(u);
        if (v - u).abs() <= 1e-15 * (1.0 + u.abs()) {
            return v;
        }
        if s >= 1.0 {
            break;
        }
        u = (v - s * u) / (1.0 - s);
    }
    let (v, _) = t(u);
    if (v - u).abs() <= 1e-13 {
        return v;
    }
    let m = game.max_abs_payoff() + 1.0;
    let (mut lo, mut hi) = (-m, m);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if t(mid).0 >= mid {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Best-reply value of `player` against the profile of everybody else.
pub fn deviation_value(profile: &SunspotProfile, game: &QuittingGame, player: usize) -> Result<f64> {
    profile.validate(game)?;
    let conforming = kiloblock_values(profile, game);
    let alone = game.unilateral(player)[player];
    let mut next = game.never_quit()[player].max(alone);
    for (k, kb) in profile.kiloblocks.iter().enumerate().rev() {
        next = kiloblock_best_reply(kb, &profile.players, game, player, next, conforming[k][player].max(next));
    }
    Ok(next)
}

/// Best-reply value minus conforming value for every player.
pub fn deviation_gains(profile: &SunspotProfile, game: &QuittingGame) -> Result<Vec<f64>> {
    let value = exact_value(profile, game)?;
    (0..game.n_players())
        .map(|i| Ok(deviation_value(profile, game, i)? - value[i]))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Megablock {
    pub first: usize,
    pub last: usize,
    /// Probability that play ends inside the megablock once it is reached.
    pub termination: f64,
    /// Normal players (original ids) who quit inside it with probability at least `ε`.
    pub heavy_quitters: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MegablockDiagnostic {
    /// Grouping rule: accumulated drift above `2/ε`, or hazard above 1 when drifts are unknown.
    pub rule: &'static str,
    pub megablocks: Vec<Megablock>,
    /// Complete megablocks with fewer than two heavy quitters.
    pub thin: usize,
}

/// Greedy split of the kiloblocks into megablocks, counting the players who
/// quit with probability at least `ε` in each.
pub fn megablocks(profile: &SunspotProfile, eps: f64) -> MegablockDiagnostic {
    let use_drift = profile.kiloblocks.iter().all(|kb| kb.drift.is_some());
    let threshold = if use_drift { 2.0 / eps } else { 1.0 };
    let n = profile.n_normal();
    let mut out = Vec::new();
    let mut start = 0;
    let mut acc = 0.0;
    let mut reach = 1.0;
    let mut quit = vec![0.0; n];
    let mut complete = Vec::new();
    for (k, kb) in profile.kiloblocks.iter().enumerate() {
        let den = kb.exit_weight();
        if den > 0.0 {
            for (j, q) in quit.iter_mut().enumerate() {
                *q += reach * kb.z[1 + j] * kb.lambda[j] / den;
            }
        }
        let stay = if den > 0.0 { kb.z[0] / den } else { 1.0 };
        acc += if use_drift { kb.drift.unwrap_or(0.0) } else if stay > 0.0 { -stay.ln() } else { f64::INFINITY };
        reach *= stay;
        let last = k + 1 == profile.kiloblocks.len();
        if acc > threshold || last {
            complete.push(acc > threshold);
            out.push(Megablock {
                first: start,
                last: k,
                termination: 1.0 - reach,
                heavy_quitters: quit
                    .iter()
                    .enumerate()
                    .filter(|(_, q)| **q >= eps)
                    .map(|(j, _)| profile.players[j])
                    .collect(),
            });
            start = k + 1;
            acc = 0.0;
            reach = 1.0;
            quit.iter_mut().for_each(|q| *q = 0.0);
        }
    }
    let thin = out
        .iter()
        .zip(&complete)
        .filter(|(m, c)| **c && m.heavy_quitters.len() < 2)
        .count();
    MegablockDiagnostic { rule: if use_drift { "drift" } else { "hazard" }, megablocks: out, thin }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SunspotReport {
    pub eps: f64,
    pub value: Vec<f64>,
    pub gains: Vec<f64>,
    pub max_gain: f64,
    /// `B ε` with `B = 10`.
    pub gain_bound: f64,
    pub termination: f64,
    /// Termination probability when each normal player never quits.
    pub termination_without: Vec<f64>,
    pub max_stage_prob: f64,
    /// `max_i |γ_i - w_i|` against the recorded anchor payoff, over normal players.
    pub anchor_gap: Option<f64>,
    pub anchor_bound: f64,
    pub megablocks: MegablockDiagnostic,
    pub failures: Vec<String>,
    pub pass: bool,
}

pub const GAIN_FACTOR: f64 = 10.0;
pub const VERIFY_SLACK: f64 = 1e-9;

pub fn verify_sunspot(profile: &SunspotProfile, game: &QuittingGame, eps: f64) -> Result<SunspotReport> {
    let value = exact_value(profile, game)?;
    let gains = deviation_gains(profile, game)?;
    let max_gain = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let gain_bound = GAIN_FACTOR * eps;
    let termination = termination_probability(profile, None);
    let termination_without = (0..profile.n_normal())
        .map(|j| termination_probability(profile, Some(j)))
        .collect();
    let max_stage_prob = profile.max_stage_prob();
    let normal_value: Vec<f64> = profile.players.iter().map(|&p| value[p]).collect();
    let anchor_gap = profile.anchor_payoff.as_ref().map(|w| sup_dist(&normal_value, w));
    let anchor_bound = 2.0 * eps;

    let mut failures = Vec::new();
    if max_gain > gain_bound + VERIFY_SLACK {
        failures.push(format!("deviation gain {max_gain} exceeds {gain_bound}"));
    }
    if termination < 1.0 - eps - VERIFY_SLACK {
        failures.push(format!("termination probability {termination} is below {}", 1.0 - eps));
    }
    if max_stage_prob >= eps {
        failures.push(format!("per-stage quitting probability {max_stage_prob} is not below {eps}"));
    }
    if let Some(gap) = anchor_gap {
        if gap >= anchor_bound {
            failures.push(format!("payoff is {gap} away from the anchor payoff, bound {anchor_bound}"));
        }
    }
    Ok(SunspotReport {
        eps,
        value,
        gains,
        max_gain,
        gain_bound,
        termination,
        termination_without,
        max_stage_prob,
        anchor_gap,
        anchor_bound,
        megablocks: megablocks(profile, eps),
        pass: failures.is_empty(),
        failures,
    })
}
