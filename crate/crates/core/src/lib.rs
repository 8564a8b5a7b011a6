//! Construction and verification of stationary and sunspot ε-equilibria in
//! multiplayer quitting games.
//!
//! The pipeline is: load and [`game::QuittingGame::normalize`] a game,
//! [`classify::classify_players`] it into normal and abnormal players, then
//! either build a stationary profile ([`stationary`]) or, when the restricted
//! matrix admits no nontrivial solution of `LCP(R̂, 0)`, assemble a sunspot
//! profile from building blocks ([`block`], [`sunspot`]).

pub mod block;
pub mod classify;
pub mod error;
pub mod game;
pub mod geometry;
pub mod lcp;
pub mod linalg;
pub mod scalar;
pub mod simplex;
pub mod stationary;
pub mod stats;
pub mod sunspot;

pub use error::{Error, Result};
pub use game::{QuittingGame, StationaryProfile};
