//! Quitting games: representation, loading, normalization and closed-form
//! payoffs of stationary profiles.
//!
//! Players are 0-based internally. Subsets of players are bitmasks (bit `i`
//! is player `i`). The file format uses 1-based ascending player lists.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::de::{Deserializer, MapAccess, Visitor};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{chunked_runs, Estimate, VecAccumulator};

/// Largest supported player count; payoffs are stored densely over all subsets.
pub const MAX_PLAYERS: usize = 16;

/// Player subset as a bitmask.
pub type Subset = u32;

pub fn singleton(i: usize) -> Subset {
    1 << i
}

/// Formats a subset as the file key: ascending 1-based ids, comma separated.
pub fn subset_key(s: Subset) -> String {
    (0..32)
        .filter(|i| s & (1 << i) != 0)
        .map(|i| (i + 1).to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_subset_key(key: &str, n: usize) -> Result<Subset> {
    let key = key.trim();
    if key.is_empty() {
        return Ok(0);
    }
    let mut mask = 0;
    for part in key.split(',') {
        let id: usize = part
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad player id {part:?} in subset key {key:?}")))?;
        if id == 0 || id > n {
            return Err(Error::Parse(format!(
                "player id {id} out of range 1..={n} in subset key {key:?}"
            )));
        }
        let bit = singleton(id - 1);
        if mask & bit != 0 {
            return Err(Error::Parse(format!("player {id} repeated in subset key {key:?}")));
        }
        mask |= bit;
    }
    Ok(mask)
}

/// A quitting game: `N` players and a terminal payoff vector for every subset.
#[derive(Debug, Clone, PartialEq)]
pub struct QuittingGame {
    n: usize,
    payoffs: Vec<Vec<f64>>,
    scale: f64,
    defaulted: BTreeSet<Subset>,
}

impl QuittingGame {
    /// Builds a game from explicit entries. Missing subsets default to the zero vector.
    pub fn new(n: usize, entries: impl IntoIterator<Item = (Subset, Vec<f64>)>) -> Result<Self> {
        if n == 0 || n > MAX_PLAYERS {
            return Err(Error::InvalidGame(format!(
                "player count must be in 1..={MAX_PLAYERS}, got {n}"
            )));
        }
        let total = 1usize << n;
        let mut payoffs: Vec<Option<Vec<f64>>> = vec![None; total];
        for (s, v) in entries {
            if s as usize >= total {
                return Err(Error::InvalidGame(format!("subset {s:#b} exceeds {n} players")));
            }
            if v.len() != n {
                return Err(Error::InvalidGame(format!(
                    "payoff for {{{}}} has length {}, expected {n}",
                    subset_key(s),
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidGame(format!(
                    "payoff for {{{}}} is not finite",
                    subset_key(s)
                )));
            }
            if payoffs[s as usize].replace(v).is_some() {
                return Err(Error::InvalidGame(format!(
                    "duplicate subset key {{{}}}",
                    subset_key(s)
                )));
            }
        }
        let defaulted = (0..total as Subset)
            .filter(|&s| payoffs[s as usize].is_none())
            .collect();
        Ok(QuittingGame {
            n,
            payoffs: payoffs
                .into_iter()
                .map(|p| p.unwrap_or_else(|| vec![0.0; n]))
                .collect(),
            scale: 1.0,
            defaulted,
        })
    }

    /// Game determined by the unilateral quit payoffs `r^i` (columns) and `r^∅`.
    pub fn from_unilateral(unilateral: &[Vec<f64>], empty: Vec<f64>) -> Result<Self> {
        let n = unilateral.len();
        let mut entries: Vec<(Subset, Vec<f64>)> = unilateral
            .iter()
            .enumerate()
            .map(|(i, r)| (singleton(i), r.clone()))
            .collect();
        entries.push((0, empty));
        Self::new(n, entries)
    }

    /// Parses the JSON game format.
    ///
    /// With `rescale` set, payoffs whose magnitude exceeds 1 are divided by the
    /// largest magnitude and the factor is recorded; otherwise they are rejected.
    pub fn from_json_str(text: &str, rescale: bool) -> Result<Self> {
        let file: GameFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if file.players == 0 || file.players > MAX_PLAYERS {
            return Err(Error::Parse(format!(
                "\"players\" must be in 1..={MAX_PLAYERS}, got {}",
                file.players
            )));
        }
        let mut entries = Vec::with_capacity(file.payoffs.0.len());
        let mut seen = BTreeSet::new();
        for (key, v) in file.payoffs.0 {
            let s = parse_subset_key(&key, file.players)?;
            if !seen.insert(s) {
                return Err(Error::Parse(format!("duplicate subset key {key:?}")));
            }
            entries.push((s, v));
        }
        let game = Self::new(file.players, entries)?;
        let max = game.max_abs_payoff();
        if max > 1.0 {
            if !rescale {
                return Err(Error::InvalidGame(format!(
                    "payoff magnitude {max} exceeds 1 and rescaling is disabled"
                )));
            }
            return Ok(game.scaled(1.0 / max));
        }
        Ok(game)
    }

    pub fn load(path: impl AsRef<Path>, rescale: bool) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text, rescale)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut payoffs = serde_json::Map::new();
        for s in 0..self.payoffs.len() as Subset {
            if !self.defaulted.contains(&s) {
                payoffs.insert(subset_key(s), serde_json::json!(self.payoffs[s as usize]));
            }
        }
        serde_json::json!({ "players": self.n, "payoffs": payoffs })
    }

    pub fn n_players(&self) -> usize {
        self.n
    }

    pub fn payoff(&self, s: Subset) -> &[f64] {
        &self.payoffs[s as usize]
    }

    /// `r^i`, the payoff when player `i` quits alone.
    pub fn unilateral(&self, i: usize) -> &[f64] {
        self.payoff(singleton(i))
    }

    /// `r^∅`, the payoff when nobody ever quits.
    pub fn never_quit(&self) -> &[f64] {
        self.payoff(0)
    }

    /// Factor by which the stored payoffs were divided relative to the input.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn defaulted_subsets(&self) -> impl Iterator<Item = Subset> + '_ {
        self.defaulted.iter().copied()
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.defaulted.is_empty() {
            let keys: Vec<String> = self
                .defaulted
                .iter()
                .map(|&s| format!("{{{}}}", subset_key(s)))
                .collect();
            out.push(format!(
                "{} subset payoff(s) defaulted to the zero vector: {}",
                keys.len(),
                keys.join(" ")
            ));
        }
        if self.scale != 1.0 {
            out.push(format!("payoffs divided by scale factor {}", self.scale));
        }
        out
    }

    pub fn max_abs_payoff(&self) -> f64 {
        self.payoffs
            .iter()
            .flatten()
            .fold(0.0, |m: f64, x| m.max(x.abs()))
    }

    pub fn is_normalized(&self) -> bool {
        (0..self.n).all(|i| self.unilateral(i)[i] == 0.0)
    }

    /// Shifts every player's payoffs so that quitting alone pays exactly 0.
    ///
    /// If the shift pushes a payoff outside `[-1, 1]` the game is rescaled and
    /// the factor accumulated into [`QuittingGame::scale`].
    pub fn normalize(&self) -> QuittingGame {
        let shift: Vec<f64> = (0..self.n).map(|i| self.unilateral(i)[i]).collect();
        let mut out = self.clone();
        for v in out.payoffs.iter_mut() {
            for (x, s) in v.iter_mut().zip(&shift) {
                *x -= s;
            }
        }
        for i in 0..out.n {
            out.payoffs[singleton(i) as usize][i] = 0.0;
        }
        let max = out.max_abs_payoff();
        if max > 1.0 {
            out = out.scaled(1.0 / max);
        }
        out
    }

    fn scaled(mut self, factor: f64) -> QuittingGame {
        for v in self.payoffs.iter_mut() {
            for x in v.iter_mut() {
                *x *= factor;
            }
        }
        self.scale /= factor;
        self
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GameFile {
    players: usize,
    payoffs: OrderedEntries,
}

/// Map entries in file order, so duplicate keys are visible to validation.
struct OrderedEntries(Vec<(String, Vec<f64>)>);

impl<'de> Deserialize<'de> for OrderedEntries {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = OrderedEntries;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from subset keys to payoff vectors")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, Vec<f64>>()? {
                    out.push((k, v));
                }
                Ok(OrderedEntries(out))
            }
        }
        d.deserialize_map(V)
    }
}

/// Per-stage quit probabilities, one per player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryProfile(pub Vec<f64>);

impl StationaryProfile {
    pub fn new(quit_probs: Vec<f64>) -> Result<Self> {
        if quit_probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Precondition(
                "stationary quit probabilities must lie in [0, 1]".into(),
            ));
        }
        Ok(StationaryProfile(quit_probs))
    }

    pub fn continue_all(n: usize) -> Self {
        StationaryProfile(vec![0.0; n])
    }

    pub fn quit_probs(&self) -> &[f64] {
        &self.0
    }

    pub fn with(&self, i: usize, p: f64) -> Self {
        let mut v = self.0.clone();
        v[i] = p;
        StationaryProfile(v)
    }

    fn support(&self) -> Subset {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .fold(0, |m, (i, _)| m | singleton(i))
    }
}

/// Probability that nobody quits in one stage, and `1 -` that, computed without cancellation.
fn stage_continue_and_stop(x: &[f64]) -> (f64, f64) {
    let log_continue: f64 = x.iter().map(|&p| (-p).ln_1p()).sum();
    (log_continue.exp(), -log_continue.exp_m1())
}

/// `Σ_{∅≠S⊆supp} P(S) r^S` where `P(S)` is the one-stage probability that exactly `S` quits.
fn absorbing_mass(game: &QuittingGame, x: &[f64]) -> Vec<f64> {
    let n = game.n_players();
    let supp = StationaryProfile(x.to_vec()).support();
    let mut acc = vec![0.0; n];
    // enumerate nonempty submasks of the support
    let mut s = supp;
    while s != 0 {
        let prob = (0..n)
            .filter(|i| supp & singleton(*i) != 0)
            .map(|i| if s & singleton(i) != 0 { x[i] } else { 1.0 - x[i] })
            .product::<f64>();
        if prob != 0.0 {
            for (a, r) in acc.iter_mut().zip(game.payoff(s)) {
                *a += prob * r;
            }
        }
        s = (s - 1) & supp;
    }
    acc
}

/// Undiscounted expected payoff of a stationary profile.
pub fn stationary_payoff(game: &QuittingGame, x: &StationaryProfile) -> Vec<f64> {
    let (_, stop) = stage_continue_and_stop(x.quit_probs());
    if stop == 0.0 {
        return game.never_quit().to_vec();
    }
    absorbing_mass(game, x.quit_probs())
        .into_iter()
        .map(|a| a / stop)
        .collect()
}

/// Payoff of a stationary profile in the discounted game, with `r^∅` as the running stage payoff.
pub fn discounted_payoff(game: &QuittingGame, x: &StationaryProfile, lambda: f64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::Precondition(format!(
            "discount parameter must lie in [0, 1), got {lambda}"
        )));
    }
    let (cont, stop) = stage_continue_and_stop(x.quit_probs());
    let weight = lambda * cont;
    let den = weight + stop;
    if den == 0.0 {
        return Ok(game.never_quit().to_vec());
    }
    let mass = absorbing_mass(game, x.quit_probs());
    Ok(mass
        .iter()
        .zip(game.never_quit())
        .map(|(a, e)| (weight * e + a) / den)
        .collect())
}

/// `max(γ_i(Q_i, x_-i), γ_i(C_i, x_-i)) - γ_i(x)`.
///
/// Against stationary opponents the continuation value is the same at every
/// stage, so one of the two pure stationary replies is a best reply.
pub fn stationary_deviation_gain(game: &QuittingGame, x: &StationaryProfile, i: usize) -> f64 {
    let base = stationary_payoff(game, x)[i];
    let quit = stationary_payoff(game, &x.with(i, 1.0))[i];
    let cont = stationary_payoff(game, &x.with(i, 0.0))[i];
    quit.max(cont) - base
}

/// Monte-Carlo estimate of the stationary payoff by simulating stages directly.
///
/// Runs that have not absorbed after `max_stages` stages are scored `r^∅`.
pub fn simulate_stationary(
    game: &QuittingGame,
    x: &StationaryProfile,
    seed: u64,
    runs: u64,
    max_stages: u64,
) -> Estimate {
    let n = game.n_players();
    let probs = x.quit_probs();
    let acc = chunked_runs(
        seed,
        runs,
        || VecAccumulator::new(n),
        |rng, acc| {
            for _ in 0..max_stages {
                let mut s: Subset = 0;
                for (i, &p) in probs.iter().enumerate() {
                    if p > 0.0 && rng.random::<f64>() < p {
                        s |= singleton(i);
                    }
                }
                if s != 0 {
                    acc.push(game.payoff(s));
                    return;
                }
            }
            acc.push(game.never_quit());
        },
        |a, b| a.merge(&b),
    );
    Estimate::from_accumulator(&acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_player() -> QuittingGame {
        QuittingGame::from_unilateral(&[vec![0.0, 1.0], vec![-1.0, 0.0]], vec![0.0, 0.0]).unwrap()
    }

    #[test]
    fn normalize_subtracts_the_unilateral_diagonal() {
        let g = QuittingGame::from_unilateral(&[vec![0.5, 0.2], vec![0.1, 0.3]], vec![0.0, 0.0])
            .unwrap()
            .normalize();
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15);
        assert!(close(g.unilateral(0), &[0.0, -0.1]));
        assert!(close(g.unilateral(1), &[-0.4, 0.0]));
        assert!(close(g.never_quit(), &[-0.5, -0.3]));
        assert_eq!(g.scale(), 1.0);
    }

    #[test]
    fn normalization_rescales_when_shift_leaves_the_unit_box() {
        let g = QuittingGame::from_unilateral(&[vec![1.0, -1.0], vec![-1.0, 0.5]], vec![-1.0, 0.0])
            .unwrap()
            .normalize();
        assert!(g.max_abs_payoff() <= 1.0);
        assert_eq!(g.scale(), 2.0);
        assert_eq!(g.never_quit(), &[-1.0, -0.25]);
        assert!(g.is_normalized());
    }

    #[test]
    fn loader_rejects_bad_lengths_and_duplicates() {
        let short = r#"{"players": 4, "payoffs": {"1": [0, 1, 0]}}"#;
        assert!(QuittingGame::from_json_str(short, true).is_err());
        let dup = r#"{"players": 2, "payoffs": {"1,2": [0, 0], "2,1": [0, 0]}}"#;
        assert!(QuittingGame::from_json_str(dup, true).is_err());
        let dup_literal = r#"{"players": 2, "payoffs": {"1": [0, 0], "1": [0, 0]}}"#;
        assert!(QuittingGame::from_json_str(dup_literal, true).is_err());
        let range = r#"{"players": 2, "payoffs": {"3": [0, 0]}}"#;
        assert!(QuittingGame::from_json_str(range, true).is_err());
    }

    #[test]
    fn loader_defaults_and_rescales() {
        let g = QuittingGame::from_json_str(r#"{"players": 3, "payoffs": {"": [0, 0, 0]}}"#, true)
            .unwrap();
        assert_eq!(g.unilateral(2), &[0.0, 0.0, 0.0]);
        assert_eq!(g.defaulted_subsets().count(), 7);
        assert_eq!(g.warnings().len(), 1);

        let big = r#"{"players": 2, "payoffs": {"1": [0, 4], "2": [-1, 0]}}"#;
        assert!(QuittingGame::from_json_str(big, false).is_err());
        let g = QuittingGame::from_json_str(big, true).unwrap();
        assert_eq!(g.scale(), 4.0);
        assert_eq!(g.unilateral(0), &[0.0, 1.0]);
        assert_eq!(g.unilateral(1), &[-0.25, 0.0]);
    }

    #[test]
    fn stationary_payoff_edge_cases() {
        let g = QuittingGame::from_unilateral(&[vec![0.0, 1.0], vec![-1.0, 0.0]], vec![-0.5, -0.3])
            .unwrap();
        assert_eq!(stationary_payoff(&g, &StationaryProfile(vec![0.0, 0.0])), vec![-0.5, -0.3]);
        assert_eq!(stationary_payoff(&g, &StationaryProfile(vec![1.0, 0.0])), vec![0.0, 1.0]);
    }

    #[test]
    fn stationary_payoff_matches_hand_formula() {
        let g = two_player();
        let (a, b) = (0.01_f64, 0.0001_f64);
        let v = stationary_payoff(&g, &StationaryProfile(vec![a, b]));
        let den = 1.0 - (1.0 - a) * (1.0 - b);
        let p1 = a * (1.0 - b) / den;
        let p2 = b * (1.0 - a) / den;
        assert!((v[0] - (-p2)).abs() < 1e-14);
        assert!((v[1] - p1).abs() < 1e-14);
        // the payoff tends to r^1 as the profile shrinks along x = (e, e^2)
        let tiny = stationary_payoff(&g, &StationaryProfile(vec![1e-6, 1e-12]));
        assert!((tiny[1] - 1.0).abs() < 1e-5 && tiny[0].abs() < 1e-5);
    }

    #[test]
    fn discounted_payoff_limits() {
        let g = QuittingGame::from_unilateral(&[vec![0.0, 1.0], vec![-1.0, 0.0]], vec![-0.5, -0.3])
            .unwrap();
        let zero = StationaryProfile(vec![0.0, 0.0]);
        assert_eq!(discounted_payoff(&g, &zero, 0.7).unwrap(), vec![-0.5, -0.3]);
        let first = StationaryProfile(vec![1.0, 0.0]);
        assert_eq!(discounted_payoff(&g, &first, 0.3).unwrap(), vec![0.0, 1.0]);
        assert!(discounted_payoff(&g, &first, 1.0).is_err());
    }

    #[test]
    fn deviation_gain_is_zero_when_everyone_gets_zero() {
        let g = QuittingGame::new(3, []).unwrap();
        let x = StationaryProfile::continue_all(3);
        for i in 0..3 {
            assert_eq!(stationary_deviation_gain(&g, &x, i), 0.0);
        }
    }
}
