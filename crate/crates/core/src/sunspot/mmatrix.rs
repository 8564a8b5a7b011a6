//! Recurrent sunspot profiles for games whose restricted matrix `R̂` has one
//! positive entry per row and column and a nonnegative inverse.
//!
//! For such games `w^i = e^i / ‖λ^i‖_1` with `λ^i = R̂^{-1} e^i` lies in `D`.
//! From node `i` the unique player `j_i` who benefits `i` quits with
//! probability `α_i`; otherwise play moves to the node drawn from `β^i`, the
//! barycentric weights of `y^{[i]} = (w^i - α_i r̂^{j_i}) / (1 - α_i)`. Each
//! node therefore has expected payoff `w^i`, and mixing the initial node
//! implements any point of the face spanned by the `w^i`.

use serde::{Deserialize, Serialize};

use super::profile::{block_length, stage_prob};
use crate::classify::Classification;
use crate::error::{Error, Result};
use crate::game::{singleton, QuittingGame};
use crate::geometry::FeasibleSet;
use crate::lcp::{inverse_positive, is_sign_m};
use crate::linalg::{sup_dist, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct MMatrixTargets<T> {
    /// `λ^i = R̂^{-1} e^i`.
    pub lambda: Vec<Vec<T>>,
    pub lambda_norm: Vec<T>,
    /// `w^i = e^i / ‖λ^i‖_1`.
    pub w: Vec<Vec<T>>,
    /// `j_i`: the column holding the positive entry of row `i`.
    pub quitter: Vec<usize>,
    pub alpha: Vec<T>,
    pub y_mid: Vec<Vec<T>>,
    pub beta: Vec<Vec<T>>,
    /// `α_i` would have to reach 1; `w^i` is then the payoff of `j_i` quitting outright.
    pub degenerate: Vec<bool>,
}

pub fn m_matrix_targets<T: Scalar>(r: &Matrix<T>) -> Result<MMatrixTargets<T>> {
    if !is_sign_m(r) {
        return Err(Error::Precondition("R̂ needs exactly one positive entry in every row and column".into()));
    }
    if !inverse_positive(r)? {
        return Err(Error::Precondition("R̂^{-1} has a negative entry".into()));
    }
    let n = r.rows();
    let inv = r.inverse()?;
    let lambda: Vec<Vec<T>> = (0..n).map(|i| inv.column(i)).collect();
    let lambda_norm: Vec<T> = lambda
        .iter()
        .map(|l| l.iter().fold(T::zero(), |a, v| a + v.abs()))
        .collect();
    let w: Vec<Vec<T>> = (0..n)
        .map(|i| {
            let mut e = vec![T::zero(); n];
            e[i] = T::one() / lambda_norm[i].clone();
            e
        })
        .collect();
    let quitter: Vec<usize> = (0..n)
        .map(|i| (0..n).find(|&j| r[(i, j)] > T::zero()).expect("sign pattern checked"))
        .collect();

    let mut alpha = Vec::with_capacity(n);
    let mut y_mid = Vec::with_capacity(n);
    let mut beta = Vec::with_capacity(n);
    let mut degenerate = Vec::with_capacity(n);
    for i in 0..n {
        let j = quitter[i];
        let a_max = w[i][i].clone() / r[(i, j)].clone();
        if a_max >= T::one() {
            alpha.push(T::one());
            y_mid.push(r.column(j));
            beta.push(vec![T::zero(); n]);
            degenerate.push(true);
            continue;
        }
        let rest = T::one() - a_max.clone();
        let y: Vec<T> = (0..n)
            .map(|k| {
                let v = (w[i][k].clone() - a_max.clone() * r[(k, j)].clone()) / rest.clone();
                if k == i || v.is_zero_tol() { T::zero() } else { v }
            })
            .collect();
        let b: Vec<T> = (0..n).map(|k| y[k].clone() * lambda_norm[k].clone()).collect();
        let total = b.iter().fold(T::zero(), |a, v| a + v.clone());
        if b.iter().any(|v| v.is_neg_tol()) || !(total - T::one()).is_zero_tol() {
            return Err(Error::Precondition(format!(
                "continuation point of node {} is outside the face spanned by the unit-direction payoffs",
                i + 1
            )));
        }
        alpha.push(a_max);
        y_mid.push(y);
        beta.push(b);
        degenerate.push(false);
    }
    Ok(MMatrixTargets { lambda, lambda_norm, w, quitter, alpha, y_mid, beta, degenerate })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentNode {
    /// Normal index of the player who quits at this node.
    pub quitter: usize,
    /// Quitting probability over the node's block.
    pub alpha: f64,
    pub block_len: u64,
    /// Distribution of the next node.
    pub next: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentProfile {
    /// Original (0-based) ids of the normal players.
    pub players: Vec<usize>,
    pub initial: Vec<f64>,
    pub nodes: Vec<RecurrentNode>,
}

#[derive(Serialize, Deserialize)]
struct RecurrentFile {
    players: Vec<usize>,
    initial: Vec<f64>,
    nodes: Vec<NodeFile>,
}

#[derive(Serialize, Deserialize)]
struct NodeFile {
    quitter: usize,
    alpha: f64,
    block_len: u64,
    next: Vec<f64>,
}

fn is_distribution(v: &[f64]) -> bool {
    v.iter().all(|x| *x >= 0.0) && (v.iter().sum::<f64>() - 1.0).abs() <= 1e-9
}

impl RecurrentProfile {
    pub fn validate(&self, game: &QuittingGame) -> Result<()> {
        let n = self.players.len();
        if self.players.iter().any(|&p| p >= game.n_players()) {
            return Err(Error::Dimension("profile names a player outside the game".into()));
        }
        if self.initial.len() != n || self.nodes.len() != n {
            return Err(Error::Dimension(format!("expected {n} nodes and initial weights")));
        }
        if !is_distribution(&self.initial) {
            return Err(Error::Precondition("initial weights are not a distribution".into()));
        }
        for (i, nd) in self.nodes.iter().enumerate() {
            if nd.quitter >= n || nd.next.len() != n || nd.block_len == 0 || !(0.0..=1.0).contains(&nd.alpha) {
                return Err(Error::Precondition(format!("node {} is malformed", i + 1)));
            }
            if nd.alpha < 1.0 && !is_distribution(&nd.next) {
                return Err(Error::Precondition(format!("node {} next weights are not a distribution", i + 1)));
            }
        }
        Ok(())
    }

    pub fn max_stage_prob(&self) -> f64 {
        self.nodes
            .iter()
            .map(|nd| stage_prob(nd.alpha, nd.block_len))
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let file = RecurrentFile {
            players: self.players.iter().map(|p| p + 1).collect(),
            initial: self.initial.clone(),
            nodes: self
                .nodes
                .iter()
                .map(|nd| NodeFile { quitter: nd.quitter + 1, alpha: nd.alpha, block_len: nd.block_len, next: nd.next.clone() })
                .collect(),
        };
        serde_json::to_value(file).expect("profile serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: RecurrentFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if file.players.contains(&0) || file.nodes.iter().any(|nd| nd.quitter == 0) {
            return Err(Error::Parse("player and quitter ids are 1-based".into()));
        }
        Ok(RecurrentProfile {
            players: file.players.into_iter().map(|p| p - 1).collect(),
            initial: file.initial,
            nodes: file
                .nodes
                .into_iter()
                .map(|nd| RecurrentNode { quitter: nd.quitter - 1, alpha: nd.alpha, block_len: nd.block_len, next: nd.next })
                .collect(),
        })
    }
}

/// Recurrent profile whose expected payoff is `target` (a full payoff vector).
pub fn implement_payoff(game: &QuittingGame, cls: &Classification, target: &[f64], eps: f64) -> Result<RecurrentProfile> {
    let n_players = game.n_players();
    if target.len() != n_players {
        return Err(Error::Dimension(format!("target has {} entries for {n_players} players", target.len())));
    }
    let r = cls.restricted_matrix()?;
    let t = m_matrix_targets(r)?;
    if let Some(i) = t.degenerate.iter().position(|d| *d) {
        return Err(Error::Precondition(format!(
            "node {} would need its quitter to quit for sure",
            i + 1
        )));
    }
    let players = cls.normal_set().to_vec();
    let lifted_columns: Vec<Vec<f64>> = players.iter().map(|&p| game.unilateral(p).to_vec()).collect();
    let d_full = FeasibleSet::new(lifted_columns.clone())?;
    if !d_full.contains(target) {
        return Err(Error::Precondition("target is not a nonnegative point of the convex hull of the normal players' quitting payoffs".into()));
    }
    let n = players.len();
    let lifted_w: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut v = vec![0.0; n_players];
            for (j, col) in lifted_columns.iter().enumerate() {
                let c = t.lambda[i][j] / t.lambda_norm[i];
                for (a, b) in v.iter_mut().zip(col) {
                    *a += c * b;
                }
            }
            v
        })
        .collect();
    let initial: Vec<f64> = (0..n)
        .map(|i| (target[players[i]] * t.lambda_norm[i]).max(0.0))
        .collect();
    let mut mix = vec![0.0; n_players];
    for (m, w) in initial.iter().zip(&lifted_w) {
        for (a, b) in mix.iter_mut().zip(w) {
            *a += m * b;
        }
    }
    if !is_distribution(&initial) || sup_dist(&mix, target) > 1e-9 {
        return Err(Error::Precondition("target is not a mixture of the unit-direction payoffs".into()));
    }
    let nodes = (0..n)
        .map(|i| {
            Ok(RecurrentNode {
                quitter: t.quitter[i],
                alpha: t.alpha[i],
                block_len: block_length(t.alpha[i], eps)?,
                next: t.beta[i].clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RecurrentProfile { players, initial, nodes })
}

/// Node values `V_i` (full payoff vectors) from
/// `V_i = α_i r^{p(j_i)} + (1 - α_i) Σ_k β^i_k V_k`.
pub fn node_values(profile: &RecurrentProfile, game: &QuittingGame) -> Result<Vec<Vec<f64>>> {
    profile.validate(game)?;
    let n = profile.nodes.len();
    let mut a = Matrix::<f64>::identity(n);
    let mut rhs = Matrix::<f64>::zeros(n, game.n_players());
    for (i, nd) in profile.nodes.iter().enumerate() {
        for k in 0..n {
            a[(i, k)] -= (1.0 - nd.alpha) * nd.next.get(k).copied().unwrap_or(0.0);
        }
        for (c, v) in game.unilateral(profile.players[nd.quitter]).iter().enumerate() {
            rhs[(i, c)] = nd.alpha * v;
        }
    }
    Ok(a.solve(&rhs)?.to_rows())
}

pub fn recurrent_value(profile: &RecurrentProfile, game: &QuittingGame) -> Result<Vec<f64>> {
    let nodes = node_values(profile, game)?;
    let mut v = vec![0.0; game.n_players()];
    for (m, row) in profile.initial.iter().zip(&nodes) {
        for (a, b) in v.iter_mut().zip(row) {
            *a += m * b;
        }
    }
    Ok(v)
}

/// Best-reply value of `player` by value iteration over the nodes.
pub fn recurrent_deviation_value(profile: &RecurrentProfile, game: &QuittingGame, player: usize) -> Result<f64> {
    let start = node_values(profile, game)?;
    let alone = game.unilateral(player)[player];
    let mut u: Vec<f64> = start.iter().map(|v| v[player]).collect();
    let probs: Vec<f64> = profile.nodes.iter().map(|nd| stage_prob(nd.alpha, nd.block_len)).collect();
    for _ in 0..1_000_000 {
        let mut change: f64 = 0.0;
        for (i, nd) in profile.nodes.iter().enumerate() {
            let cont: f64 = if nd.alpha >= 1.0 { 0.0 } else { nd.next.iter().zip(&u).map(|(b, v)| b * v).sum() };
            let q = profile.players[nd.quitter];
            let v = if q == player {
                alone.max(cont)
            } else if nd.alpha >= 1.0 {
                game.payoff(singleton(player) | singleton(q))[player].max(game.unilateral(q)[player])
            } else {
                let p = probs[i];
                let quit_now = p * game.payoff(singleton(player) | singleton(q))[player] + (1.0 - p) * alone;
                let other = game.unilateral(q)[player];
                let mut c = cont;
                for _ in 0..nd.block_len {
                    c = quit_now.max(p * other + (1.0 - p) * c);
                }
                c
            };
            change = change.max((v - u[i]).abs());
            u[i] = v;
        }
        if change < 1e-15 {
            break;
        }
    }
    Ok(profile.initial.iter().zip(&u).map(|(m, v)| m * v).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecurrentReport {
    pub eps: f64,
    pub value: Vec<f64>,
    pub gains: Vec<f64>,
    pub max_gain: f64,
    pub gain_bound: f64,
    pub max_stage_prob: f64,
    pub target_gap: Option<f64>,
    pub failures: Vec<String>,
    pub pass: bool,
}

pub fn verify_recurrent(profile: &RecurrentProfile, game: &QuittingGame, eps: f64, target: Option<&[f64]>) -> Result<RecurrentReport> {
    let value = recurrent_value(profile, game)?;
    let gains = (0..game.n_players())
        .map(|i| Ok(recurrent_deviation_value(profile, game, i)? - value[i]))
        .collect::<Result<Vec<f64>>>()?;
    let max_gain = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let gain_bound = super::evaluate::GAIN_FACTOR * eps;
    let max_stage_prob = profile.max_stage_prob();
    let target_gap = target.map(|t| sup_dist(t, &value));
    let mut failures = Vec::new();
    if max_gain > gain_bound + super::evaluate::VERIFY_SLACK {
        failures.push(format!("deviation gain {max_gain} exceeds {gain_bound}"));
    }
    if max_stage_prob >= eps {
        failures.push(format!("per-stage quitting probability {max_stage_prob} is not below {eps}"));
    }
    if profile.nodes.iter().any(|nd| nd.alpha <= 0.0) {
        failures.push("a node never ends play, so termination is not certain".into());
    }
    if let Some(gap) = target_gap {
        if gap > 1e-9 {
            failures.push(format!("payoff is {gap} away from the target"));
        }
    }
    Ok(RecurrentReport {
        eps,
        value,
        gains,
        max_gain,
        gain_bound,
        max_stage_prob,
        target_gap,
        pass: failures.is_empty(),
        failures,
    })
}
