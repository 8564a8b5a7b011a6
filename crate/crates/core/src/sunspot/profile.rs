//! Kiloblock profiles and their JSON form.
//!
//! A kiloblock is a lottery `z` over block types. Type `0` is a single stage in
//! which everybody continues and play moves to the next kiloblock. Type `j` is
//! a block of `C` stages in which normal player `j` alone quits with per-stage
//! probability `p`, chosen so that `1 - (1 - p)^C = λ_j`. If nobody quits, the
//! same kiloblock is drawn again. After the last kiloblock everybody continues
//! forever.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::sequence::AnchorSequence;
use crate::error::{Error, Result};
use crate::game::QuittingGame;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kiloblock {
    /// `z[0]` is the type-0 weight, `z[1 + j]` the weight of normal player `j`.
    pub z: Vec<f64>,
    /// Quitting probability over a whole block, one entry per normal player.
    pub lambda: Vec<f64>,
    pub block_len: u64,
    /// Drift of the building block this kiloblock came from, if known.
    pub drift: Option<f64>,
}

impl Kiloblock {
    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    /// Per-stage quitting probability of normal player `j` inside its block.
    pub fn stage_prob(&self, j: usize) -> f64 {
        stage_prob(self.lambda[j], self.block_len)
    }

    /// Weight of the draws that end the kiloblock: `z_0 + Σ z_j λ_j`.
    pub fn exit_weight(&self) -> f64 {
        self.z[0] + self.quit_weight(None)
    }

    /// `Σ z_j λ_j`, optionally leaving out one normal player.
    pub fn quit_weight(&self, skip: Option<usize>) -> f64 {
        self.lambda
            .iter()
            .enumerate()
            .filter(|&(j, _)| Some(j) != skip)
            .map(|(j, l)| self.z[1 + j] * l)
            .sum()
    }
}

/// `p` with `1 - (1 - p)^C = λ`.
pub fn stage_prob(lambda: f64, block_len: u64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    -(f64::ln_1p(-lambda) / block_len as f64).exp_m1()
}

/// Smallest block length whose per-stage probability for `λ` is below `ε`.
pub fn block_length(lambda: f64, eps: f64) -> Result<u64> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::Precondition(format!("block probability must lie in [0, 1), got {lambda}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Precondition(format!("ε must lie in (0, 1), got {eps}")));
    }
    if lambda == 0.0 {
        return Ok(1);
    }
    let mut c = (f64::ln_1p(-lambda) / f64::ln_1p(-eps)).ceil().max(1.0) as u64;
    while stage_prob(lambda, c) >= eps {
        c += 1;
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SunspotProfile {
    /// Original (0-based) ids of the normal players, in normal-index order.
    pub players: Vec<usize>,
    /// Kiloblocks in the order they are played.
    pub kiloblocks: Vec<Kiloblock>,
    /// Expected payoff of the normal players predicted by the construction.
    pub anchor_payoff: Option<Vec<f64>>,
}

impl SunspotProfile {
    pub fn n_normal(&self) -> usize {
        self.players.len()
    }

    pub fn validate(&self, game: &QuittingGame) -> Result<()> {
        let n = self.players.len();
        for &p in &self.players {
            if p >= game.n_players() {
                return Err(Error::Dimension(format!(
                    "profile player {} is not in a {}-player game",
                    p + 1,
                    game.n_players()
                )));
            }
        }
        for (k, kb) in self.kiloblocks.iter().enumerate() {
            if kb.z.len() != n + 1 || kb.lambda.len() != n {
                return Err(Error::Dimension(format!(
                    "kiloblock {} has {} weights and {} block probabilities for {n} players",
                    k + 1,
                    kb.z.len(),
                    kb.lambda.len()
                )));
            }
            let total: f64 = kb.z.iter().sum();
            if kb.z.iter().any(|v| v.is_nan() || *v < 0.0) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::Precondition(format!("kiloblock {} weights are not a distribution", k + 1)));
            }
            if kb.lambda.iter().any(|v| !(0.0..1.0).contains(v)) {
                return Err(Error::Precondition(format!("kiloblock {} has a block probability outside [0, 1)", k + 1)));
            }
            if kb.block_len == 0 {
                return Err(Error::Precondition(format!("kiloblock {} has block length 0", k + 1)));
            }
        }
        Ok(())
    }

    /// Largest per-stage quitting probability used anywhere in the profile.
    pub fn max_stage_prob(&self) -> f64 {
        self.kiloblocks
            .iter()
            .flat_map(|kb| (0..kb.n()).filter(|&j| kb.z[1 + j] > 0.0).map(move |j| kb.stage_prob(j)))
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let file = ProfileFile {
            players: self.players.iter().map(|p| p + 1).collect(),
            kiloblocks: self
                .kiloblocks
                .iter()
                .map(|kb| KiloblockFile {
                    z: kb.z.clone(),
                    lambda: kb
                        .lambda
                        .iter()
                        .enumerate()
                        .filter(|(_, l)| **l > 0.0)
                        .map(|(j, l)| ((j + 1).to_string(), *l))
                        .collect(),
                    block_len: kb.block_len,
                    drift: kb.drift,
                })
                .collect(),
            tail: "continue".into(),
            w: self.anchor_payoff.clone(),
        };
        serde_json::to_value(file).expect("profile serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ProfileFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if file.tail != "continue" {
            return Err(Error::Parse(format!("unsupported tail {:?}", file.tail)));
        }
        if file.players.contains(&0) {
            return Err(Error::Parse("player ids are 1-based".into()));
        }
        let n = file.players.len();
        let mut kiloblocks = Vec::with_capacity(file.kiloblocks.len());
        for (k, kb) in file.kiloblocks.into_iter().enumerate() {
            let mut lambda = vec![0.0; n];
            for (key, v) in kb.lambda {
                let j: usize = key
                    .parse()
                    .ok()
                    .filter(|j| (1..=n).contains(j))
                    .ok_or_else(|| Error::Parse(format!("kiloblock {}: bad normal index {key:?}", k + 1)))?;
                lambda[j - 1] = v;
            }
            kiloblocks.push(Kiloblock { z: kb.z, lambda, block_len: kb.block_len, drift: kb.drift });
        }
        Ok(SunspotProfile {
            players: file.players.into_iter().map(|p| p - 1).collect(),
            kiloblocks,
            anchor_payoff: file.w,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ProfileFile {
    players: Vec<usize>,
    kiloblocks: Vec<KiloblockFile>,
    #[serde(default = "continue_tail")]
    tail: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    w: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct KiloblockFile {
    z: Vec<f64>,
    #[serde(default)]
    lambda: BTreeMap<String, f64>,
    block_len: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    drift: Option<f64>,
}

fn continue_tail() -> String {
    "continue".into()
}

/// Kiloblock `k` plays the building block of `y^{K-k+1}`, so the last
/// kiloblock plays the block of the first anchor.
pub fn assemble_profile(seq: &AnchorSequence, players: &[usize]) -> Result<SunspotProfile> {
    if seq.is_empty() {
        return Err(Error::Sequence("empty anchor sequence".into()));
    }
    let eps = seq.eps;
    let mut kiloblocks = Vec::with_capacity(seq.len());
    for block in seq.blocks.iter().rev() {
        if block.n() != players.len() {
            return Err(Error::Dimension(format!(
                "block has {} players, expected {}",
                block.n(),
                players.len()
            )));
        }
        let mut len = 1;
        for j in 0..block.n() {
            if block.z[1 + j] > 0.0 {
                len = len.max(block_length(block.lambda[j], eps)?);
            }
        }
        kiloblocks.push(Kiloblock {
            z: block.z.clone(),
            lambda: block.lambda.clone(),
            block_len: len,
            drift: Some(block.drift()),
        });
    }
    Ok(SunspotProfile {
        players: players.to_vec(),
        kiloblocks,
        anchor_payoff: Some(seq.blocks.last().expect("nonempty").w.clone()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_lengths() {
        assert_eq!(block_length(0.5, 0.1).unwrap(), 7);
        assert_eq!(block_length(0.99, 0.01).unwrap(), 459);
        // λ = ε needs a second stage because the per-stage bound is strict.
        assert_eq!(block_length(0.1, 0.1).unwrap(), 2);
        assert_eq!(block_length(0.0, 0.1).unwrap(), 1);
        assert!(block_length(1.0, 0.1).is_err());
    }

    #[test]
    fn stage_prob_compounds_to_lambda() {
        for &(l, c) in &[(0.5, 7u64), (0.99, 459), (1e-9, 1)] {
            let p = stage_prob(l, c);
            let back = 1.0 - (1.0 - p).powi(c as i32);
            assert!((back - l).abs() < 1e-12 * l.max(1e-3), "{l} {c} {back}");
        }
    }

    #[test]
    fn json_round_trip() {
        let profile = SunspotProfile {
            players: vec![0, 2],
            kiloblocks: vec![Kiloblock { z: vec![0.5, 0.25, 0.25], lambda: vec![0.1, 0.0], block_len: 2, drift: None }],
            anchor_payoff: Some(vec![0.1, 0.2]),
        };
        let text = profile.to_json().to_string();
        assert!(text.contains("\"players\":[1,3]"));
        assert_eq!(SunspotProfile::from_json_str(&text).unwrap(), profile);
    }

    #[test]
    fn rejects_bad_normal_index() {
        let text = r#"{"players":[1],"kiloblocks":[{"z":[1,0],"lambda":{"2":0.1},"block_len":1}]}"#;
        assert!(SunspotProfile::from_json_str(text).is_err());
    }
}
