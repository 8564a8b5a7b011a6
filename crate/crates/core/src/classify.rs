//! Normal/abnormal classification of players and the restricted matrix `R̂`.
//!
//! Starting from all players, repeatedly keep only those players `i` for whom
//! some other remaining player `j` has `r^j_i <= 0`, i.e. someone left in the
//! set can hurt `i` by quitting alone. The fixed point is the normal set.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::QuittingGame;
use crate::linalg::Matrix;

/// Slack on the `r^j_i <= 0` test so that values that round-trip through text stay classified.
pub const CLASSIFY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    /// `I_0 ⊇ I_1 ⊇ … ⊇ I_L`, 0-based player ids, each ascending; `I_L` repeats as the fixed point.
    pub chain: Vec<Vec<usize>>,
    /// Original player id of each normal player, ascending.
    pub order: Vec<usize>,
    #[serde(skip)]
    rhat: Matrix<f64>,
}

impl Classification {
    pub fn normal_set(&self) -> &[usize] {
        &self.order
    }

    pub fn n_normal(&self) -> usize {
        self.order.len()
    }

    pub fn is_normal(&self, player: usize) -> bool {
        self.order.contains(&player)
    }

    /// Index of `player` among the normal players.
    pub fn normal_index(&self, player: usize) -> Option<usize> {
        self.order.iter().position(|&p| p == player)
    }

    /// `I_l`, or the fixed point for `l` past the end of the chain.
    pub fn level(&self, l: usize) -> &[usize] {
        &self.chain[l.min(self.chain.len() - 1)]
    }

    /// `R̂`, whose column `b` is `r^{order[b]}` restricted to the normal coordinates.
    ///
    /// Fails when the normal set is empty; the all-abnormal stationary profile applies then.
    pub fn restricted_matrix(&self) -> Result<&Matrix<f64>> {
        if self.order.is_empty() {
            return Err(Error::EmptyNormalSet);
        }
        Ok(&self.rhat)
    }

    /// Column `r̂^b` of `R̂`.
    pub fn column(&self, b: usize) -> Vec<f64> {
        self.rhat.column(b)
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.n_normal()).map(|b| self.column(b)).collect()
    }

    /// Embeds a vector over normal coordinates into all `N` coordinates, zero elsewhere.
    pub fn lift(&self, v: &[f64], n_players: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_players];
        for (b, &p) in self.order.iter().enumerate() {
            out[p] = v[b];
        }
        out
    }

    /// Restricts a full payoff vector to the normal coordinates.
    pub fn restrict(&self, v: &[f64]) -> Vec<f64> {
        self.order.iter().map(|&p| v[p]).collect()
    }
}

fn next_level(game: &QuittingGame, current: &[usize]) -> Vec<usize> {
    current
        .iter()
        .copied()
        .filter(|&i| {
            current
                .iter()
                .any(|&j| j != i && game.unilateral(j)[i] <= CLASSIFY_TOLERANCE)
        })
        .collect()
}

/// Runs the recursion to its fixed point and assembles `R̂`.
///
/// The game should already be normalized; the test `r^j_i <= 0` is only
/// meaningful relative to `r^i_i = 0`.
pub fn classify_players(game: &QuittingGame) -> Classification {
    let mut chain = vec![(0..game.n_players()).collect::<Vec<_>>()];
    loop {
        let next = next_level(game, chain.last().unwrap());
        let stable = next == *chain.last().unwrap();
        chain.push(next);
        if stable {
            break;
        }
    }
    let order = chain.last().unwrap().clone();
    let columns: Vec<Vec<f64>> = order
        .iter()
        .map(|&j| order.iter().map(|&i| game.unilateral(j)[i]).collect())
        .collect();
    let mut rhat = Matrix::from_columns(&columns).expect("columns share the normal-set length");
    for b in 0..order.len() {
        rhat[(b, b)] = 0.0;
    }
    Classification { chain, order, rhat }
}

/// Every normal player's solo quit pays every abnormal player strictly positively.
pub fn abnormal_players_rewarded(game: &QuittingGame, cls: &Classification) -> bool {
    let normal = cls.normal_set();
    (0..game.n_players())
        .filter(|j| !cls.is_normal(*j))
        .all(|j| normal.iter().all(|&i| game.unilateral(i)[j] > 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn team_game() -> QuittingGame {
        let q = -0.25;
        QuittingGame::from_unilateral(
            &[
                vec![0.0, 1.0, q, q],
                vec![1.0, 0.0, q, q],
                vec![q, q, 0.0, 1.0],
                vec![q, q, 1.0, 0.0],
            ],
            vec![0.0; 4],
        )
        .unwrap()
    }

    #[test]
    fn four_player_example_is_all_normal() {
        let cls = classify_players(&team_game());
        assert_eq!(cls.normal_set(), &[0, 1, 2, 3]);
        assert_eq!(cls.chain.len(), 2);
        let r = cls.restricted_matrix().unwrap();
        assert_eq!(r.column(0), vec![0.0, 1.0, -0.25, -0.25]);
        assert_eq!(r.column(3), vec![-0.25, -0.25, 1.0, 0.0]);
    }

    #[test]
    fn all_positive_game_is_all_abnormal() {
        let g = QuittingGame::from_unilateral(
            &[vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]],
            vec![0.0; 3],
        )
        .unwrap();
        let cls = classify_players(&g);
        assert!(cls.normal_set().is_empty());
        assert_eq!(cls.level(1), &[] as &[usize]);
        assert!(matches!(cls.restricted_matrix(), Err(Error::EmptyNormalSet)));
    }

    #[test]
    fn single_punisher_chain_collapses() {
        // Player 1 is hurt when player 2 quits, but nobody can hurt player 2.
        let g = QuittingGame::from_unilateral(&[vec![0.0, 1.0], vec![-1.0, 0.0]], vec![0.0; 2]).unwrap();
        let cls = classify_players(&g);
        assert_eq!(cls.chain, vec![vec![0, 1], vec![0], vec![], vec![]]);
    }

    #[test]
    fn mutual_punishers_stay_normal() {
        let g = QuittingGame::from_unilateral(&[vec![0.0, 0.0], vec![-1.0, 0.0]], vec![0.0; 2]).unwrap();
        let cls = classify_players(&g);
        assert_eq!(cls.normal_set(), &[0, 1]);
        assert_eq!(cls.restricted_matrix().unwrap().to_rows(), vec![vec![0.0, -1.0], vec![0.0, 0.0]]);
    }
}
