// SPDX-License-Identifier: MIT OR Apache-2.0

//! Domain types: games, controls, noise, time grids and constant ledgers.
//!
//! An N-player game is described by per-player evaluators
//!
//! ```text
//! b_i(t, x_i, y, u_i),  σ_i(t, x_i, y, u_i)     y ∈ ℝ^N the full state vector
//! f_i(t, y, u),         g_i(y)                  u ∈ ℝ^N the control profile
//! ```
//!
//! together with an initial law for ξ and an optional common noise. Every
//! evaluator supplies analytic first and second partials; the [`fd`] wrapper
//! derives them numerically for prototyping.

pub mod controls;
pub mod fd;
pub mod game;
pub mod grid;
pub mod ledger;
pub mod noise;
pub mod validate;

pub use controls::{ControlProfile, ControlTerm, Direction, ScalarControl};
pub use game::{
    CoefFirst, CoefSecond, CostFirst, CostSecond, GameSpec, InitialLaw, RunningCost, StateCoefficient, TerminalCost,
};
pub use grid::TimeGrid;
pub use ledger::{ConstantLedger, GapNorms};
pub use noise::NoiseBundle;
pub use validate::{validate_game, SampleBox, ValidationReport};
