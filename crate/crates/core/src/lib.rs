// SPDX-License-Identifier: MIT OR Apache-2.0

//! Monte Carlo toolkit for α-potential stochastic differential games.
//!
//! The crate simulates N-player controlled diffusions
//!
//! ```text
//! dX_i = b_i(t, X_i, X, u_i) dt + σ_i(t, X_i, X, u_i) dW^i   (+ dW^0 with common noise)
//! V_i(u) = E[ ∫ f_i(t, X, u) dt + g_i(X_T) ]
//! ```
//!
//! and computes first- and second-order linear derivatives of the costs
//! `V_i` by three independent routes: finite differences under common random
//! numbers, forward sensitivity (tangent) processes, and adjoint BSDEs solved
//! by least-squares Monte Carlo. On top of these it estimates the cross
//! derivative asymmetry that measures how far a game is from being a
//! potential game, and evaluates the closed-form constant ledgers that bound
//! that distance.
//!
//! Modules:
//! - [`model`]: game definitions, controls, noise, grids, constant ledgers;
//! - [`sim`]: Euler–Maruyama paths, first and second sensitivity processes;
//! - [`bsde`]: regression solvers for linear BSDEs and the adjoint equations;
//! - [`derivatives`]: cost values and linear derivatives by every route;
//! - [`alpha`]: asymmetry, α estimates, potential function, bound ledgers;
//! - [`app`]: presets, configuration, experiment runners, reports.

// Index loops mirror the component notation of the formulas.
#![allow(clippy::needless_range_loop)]

pub mod alpha;
pub mod app;
pub mod bsde;
pub mod derivatives;
pub mod error;
pub mod model;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
