//! Repeated normal-form games between one optimizer and a population of
//! no-regret learners.
//!
//! The crate covers four layers:
//!
//! - [`game`]: finite games, mixed strategies, joint distributions, best
//!   replies and the learners' game induced by a committed optimizer strategy.
//! - [`learners`]: internal- and external-regret matching, regret bookkeeping
//!   and two scripted learners that reproduce deterministic counterexample
//!   traces.
//! - [`equilibria`]: a dense simplex solver, correlated-equilibrium and
//!   Hannan polytopes, Nash enumeration and the pure, mixed, correlated and
//!   Hannan Stackelberg values.
//! - [`simulation`]: the seeded repeated-game engine and the metrics used to
//!   check payoff guarantees empirically.
//!
//! The optimizer is always the last player of a game.

pub mod equilibria;
pub mod error;
pub mod files;
pub mod fixtures;
pub mod format;
pub mod game;
pub mod learners;
pub mod simulation;

pub use error::{Error, Result};
pub use game::{
    best_reply_set, expected_utility, expected_utility_joint, induce_game,
    is_very_weakly_dominated, GameSpec, JointDistribution, MixedProfile, MixedStrategy,
};
