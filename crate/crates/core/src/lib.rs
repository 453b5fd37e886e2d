//! Game-theoretic model of information dissemination in social networks.
//!
//! A sender decides whether to forward an assertion and a receiver whether to
//! give feedback; both weigh the effect on their self-perceived knowledge,
//! reputation and popularity. [`engine`] repeats that 2×2 game over a
//! population and [`metrics`] records how knowledge spreads.

pub mod cli;
pub mod dynamics;
pub mod engine;
pub mod evaluation;
pub mod game;
pub mod metrics;
pub mod model;

pub use engine::{run, SimulationConfig, SimulationSummary, World};
pub use game::{solve_equilibrium, EquilibriumProfile, PayoffMatrix};
pub use model::{ActorState, GlobalParams, Personality};
