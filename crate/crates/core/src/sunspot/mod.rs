//! Sunspot ε-equilibria for games where no stationary construction applies.
//!
//! [`sequence`] follows the anchor map on the boundary of `D`,
//! [`profile`] turns the resulting blocks into kiloblocks, [`evaluate`] computes
//! exact payoffs and best replies, and [`mmatrix`] builds recurrent profiles
//! for the special sign pattern where one is available in closed form.

pub mod evaluate;
pub mod mmatrix;
pub mod profile;
pub mod sequence;
pub mod simulate;

pub use evaluate::{deviation_gains, exact_value, termination_probability, verify_sunspot, SunspotReport};
pub use mmatrix::{implement_payoff, m_matrix_targets, verify_recurrent, RecurrentProfile};
pub use profile::{assemble_profile, block_length, Kiloblock, SunspotProfile};
pub use sequence::{generate_sequence, AnchorSequence};

use crate::classify::classify_players;
use crate::error::{Error, Result};
use crate::game::QuittingGame;
use crate::geometry::FeasibleSet;

#[derive(Debug, Clone)]
pub struct SunspotOutcome {
    pub sequence: AnchorSequence,
    pub profile: SunspotProfile,
    pub report: SunspotReport,
}

/// Full pipeline for a normalized game: classify, build the anchor sequence,
/// assemble the kiloblock profile, and verify it.
pub fn sunspot_equilibrium(game: &QuittingGame, eps: f64) -> Result<SunspotOutcome> {
    if !game.is_normalized() {
        return Err(Error::Precondition("the game must be normalized first".into()));
    }
    let cls = classify_players(game);
    let d = FeasibleSet::from_classification(&cls)?;
    let sequence = generate_sequence(&d, eps)?;
    let profile = assemble_profile(&sequence, cls.normal_set())?;
    let report = verify_sunspot(&profile, game, eps)?;
    Ok(SunspotOutcome { sequence, profile, report })
}
