//! Game-theoretic modeling engine.
//!
//! The crate is organised by subsystem:
//!
//! - [`lp`]: dense two-phase simplex used by the cooperative and incentive solvers.
//! - [`game`]: finite strategic-form games, best responses, pure Nash enumeration.
//! - [`coop`]: transferable-utility games (core, Shapley value, nucleolus).
//! - [`matching`]: one-to-one two-sided matching and Deferred Acceptance.
//! - [`learning`]: seeded multi-agent learning dynamics and regret diagnostics.
//! - [`coordination`]: signals, admissible sets, two-time-scale loops, Stackelberg
//!   design, dynamic-game rollouts and coalition dynamics.
//! - [`incentives`]: payoff transfers, Pareto and budget checks, incentive synthesis.
//! - [`network`]: nonatomic routing games, Wardrop equilibria, Braess and tolls.
//! - [`resilience`]: corrupted information, trust weights and trimmed consensus.
//! - [`templates`]: ready-made game instances used by scenarios and tests.

pub mod coop;
pub mod coordination;
mod error;
pub mod game;
pub mod incentives;
pub mod learning;
pub mod lp;
pub mod matching;
pub mod network;
pub mod resilience;
pub mod rng;
pub mod templates;

pub use error::{Error, Result};

/// Absolute tolerance shared by the cooperative, incentive and LP checks.
pub const TOL: f64 = 1e-9;
