//! Explicit stationary ε-equilibria and their verification.
//!
//! Three constructions cover every game whose normal set is empty or whose
//! restricted matrix has a nontrivial solution of `LCP(R̂, 0)`:
//!
//! * a player `i` with `r^i >= 0` who can be punished by some `j` quits with
//!   probability `ε` while `j` quits with probability `ε²` (4ε-equilibrium);
//! * with every player abnormal, either nobody quits, one player with a
//!   negative `r^∅` coordinate quits with probability `ε` (2ε), or the
//!   previous profile applies to a player of the deepest nonempty level;
//! * from a solution `(w, z)` of `LCP(R̂, 0)` with `z_0 < 1`, each normal
//!   player `i` quits with probability `ε z_i` (4ε).

use serde::Serialize;

use crate::classify::{classify_players, Classification, CLASSIFY_TOLERANCE};
use crate::error::{Error, Result};
use crate::game::{stationary_deviation_gain, stationary_payoff, QuittingGame, StationaryProfile};
use crate::lcp::{nontrivial_zero_solution, LcpSolution, SUPPORT_TOLERANCE};

/// Times ε is halved when a construction fails its stated bound.
pub const MAX_HALVINGS: usize = 20;

/// Slack added to every gain bound to absorb rounding.
pub const GAIN_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Nobody quits; `r^∅ >= 0` for all players.
    AllContinue,
    /// One player with `r^∅_i < 0` quits with probability ε.
    SingleQuitter,
    /// A player with a nonnegative solo-quit vector, backed by a punisher.
    NonnegativeQuitter,
    /// Quit probabilities proportional to a solution of `LCP(R̂, 0)`.
    ZeroLcpSolution,
}

impl Branch {
    /// Gain bound, as a multiple of ε, that the construction guarantees.
    pub fn bound_factor(self) -> f64 {
        match self {
            Branch::AllContinue => 0.0,
            Branch::SingleQuitter => 2.0,
            Branch::NonnegativeQuitter | Branch::ZeroLcpSolution => 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryReport {
    pub payoff: Vec<f64>,
    pub gains: Vec<f64>,
    pub max_gain: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Per-player deviation gains of `x` and whether all are at most `bound`.
pub fn verify_stationary(game: &QuittingGame, x: &StationaryProfile, bound: f64) -> StationaryReport {
    let gains: Vec<f64> = (0..game.n_players())
        .map(|i| stationary_deviation_gain(game, x, i))
        .collect();
    let max_gain = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    StationaryReport {
        payoff: stationary_payoff(game, x),
        pass: gains.iter().all(|&g| g <= bound + GAIN_SLACK),
        gains,
        max_gain,
        bound,
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Precondition(format!("ε must lie in (0, 1], got {eps}")));
    }
    Ok(())
}

/// `x_i = ε`, `x_j = ε²` for the smallest `j != i` with `r^j_i <= 0`, everyone else continues.
///
/// Requires `r^i >= 0` in every coordinate and the existence of such a `j`.
/// Normality of `i` is not required, so the all-abnormal construction can
/// reuse this profile for a player of the deepest nonempty level.
pub fn construct_normal_nonneg(game: &QuittingGame, i: usize, eps: f64) -> Result<StationaryProfile> {
    check_eps(eps)?;
    let n = game.n_players();
    if i >= n {
        return Err(Error::Precondition(format!("player {} does not exist", i + 1)));
    }
    if let Some(k) = game.unilateral(i).iter().position(|&v| v < 0.0) {
        return Err(Error::Precondition(format!(
            "r^{} has negative coordinate {} for player {}",
            i + 1,
            game.unilateral(i)[k],
            k + 1
        )));
    }
    let j = (0..n)
        .find(|&j| j != i && game.unilateral(j)[i] <= CLASSIFY_TOLERANCE)
        .ok_or_else(|| {
            Error::Precondition(format!("no player's solo quit gives player {} a nonpositive payoff", i + 1))
        })?;
    let mut x = vec![0.0; n];
    x[i] = eps;
    x[j] = eps * eps;
    StationaryProfile::new(x)
}

/// Stationary profile for a game with no normal players.
pub fn construct_all_abnormal(
    game: &QuittingGame,
    cls: &Classification,
    eps: f64,
) -> Result<(Branch, StationaryProfile)> {
    check_eps(eps)?;
    if cls.n_normal() != 0 {
        return Err(Error::Precondition("the normal set is not empty".into()));
    }
    let n = game.n_players();
    let empty = game.never_quit();
    if empty.iter().all(|&v| v >= 0.0) {
        return Ok((Branch::AllContinue, StationaryProfile::continue_all(n)));
    }
    if cls.level(1).is_empty() {
        let i = empty.iter().position(|&v| v < 0.0).expect("some coordinate is negative");
        return Ok((Branch::SingleQuitter, StationaryProfile::continue_all(n).with(i, eps)));
    }
    let deepest = cls
        .chain
        .iter()
        .rev()
        .find(|level| !level.is_empty())
        .expect("I_1 is nonempty");
    let i = deepest[0];
    Ok((Branch::NonnegativeQuitter, construct_normal_nonneg(game, i, eps)?))
}

/// `x_i = ε z_i` over the normal players, from a solution of `LCP(R̂, 0)` with `z_0 < 1`.
///
/// A solution supported on a single column means that column is a nonnegative
/// solo-quit vector, and the corresponding profile is used instead.
pub fn construct_from_lcp_zero(
    game: &QuittingGame,
    cls: &Classification,
    sol: &LcpSolution<f64>,
    eps: f64,
) -> Result<StationaryProfile> {
    check_eps(eps)?;
    let n = cls.n_normal();
    let r = cls.restricted_matrix()?;
    if sol.w.len() != n || sol.z.len() != n + 1 {
        return Err(Error::Dimension(format!(
            "solution sizes ({}, {}) do not match {n} normal players",
            sol.w.len(),
            sol.z.len()
        )));
    }
    let zeros = vec![0.0; n];
    if !crate::lcp::is_solution(r, &zeros, sol) || sol.z[0] >= 1.0 - SUPPORT_TOLERANCE {
        return Err(Error::Precondition("not a solution of LCP(R̂, 0) with z_0 < 1".into()));
    }
    let support = sol.support();
    if let [only] = support[..] {
        return construct_normal_nonneg(game, cls.normal_set()[only], eps);
    }
    let mut x = vec![0.0; game.n_players()];
    for (b, &p) in cls.normal_set().iter().enumerate() {
        x[p] = eps * sol.z[b + 1];
    }
    StationaryProfile::new(x)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryOutcome {
    pub branch: Branch,
    /// ε actually used, after any halving.
    pub eps: f64,
    pub profile: StationaryProfile,
    pub report: StationaryReport,
    pub halvings: usize,
}

/// Picks the applicable construction for a normalized game and verifies it at
/// its stated bound, halving ε when verification fails.
///
/// Returns `None` when the normal set is nonempty and `LCP(R̂, 0)` has only
/// the trivial solution; only sunspot profiles are constructed then.
pub fn stationary_equilibrium(game: &QuittingGame, eps: f64) -> Result<Option<StationaryOutcome>> {
    check_eps(eps)?;
    let cls = classify_players(game);
    let zero_solution = if cls.n_normal() == 0 {
        None
    } else {
        match nontrivial_zero_solution(cls.restricted_matrix()?)? {
            Some(sol) => Some(sol),
            None => return Ok(None),
        }
    };
    let mut e = eps;
    let mut last = None;
    for halvings in 0..=MAX_HALVINGS {
        let (branch, profile) = match &zero_solution {
            None => construct_all_abnormal(game, &cls, e)?,
            Some(sol) => {
                let profile = construct_from_lcp_zero(game, &cls, sol, e)?;
                let branch = if sol.support().len() == 1 {
                    Branch::NonnegativeQuitter
                } else {
                    Branch::ZeroLcpSolution
                };
                (branch, profile)
            }
        };
        let report = verify_stationary(game, &profile, branch.bound_factor() * e);
        let outcome = StationaryOutcome { branch, eps: e, profile, report, halvings };
        if outcome.report.pass {
            return Ok(Some(outcome));
        }
        last = Some(outcome);
        e /= 2.0;
    }
    let last = last.expect("at least one attempt");
    Err(Error::Verification {
        attempts: MAX_HALVINGS + 1,
        detail: format!(
            "largest gain {} exceeds {} at ε = {}",
            last.report.max_gain, last.report.bound, last.eps
        ),
    })
}
