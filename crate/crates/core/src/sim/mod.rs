// SPDX-License-Identifier: MIT OR Apache-2.0

//! Forward simulation: state paths, first- and second-order sensitivities.
//!
//! All processes share one [`NoiseBundle`](crate::model::NoiseBundle) and use
//! the explicit Euler–Maruyama scheme
//!
//! ```text
//! X_{k+1} = X_k + b(t_k, X_k, u_k) dt + σ(t_k, X_k, u_k) ΔW_k
//! Y_{k+1} = Y_k + (B0 Y_k + B1u u'_k) dt + Σ_j (Π0^j Y_k + Π1u^j u'_k) ΔW^j_k
//! ```
//!
//! The sensitivity recursions are the exact first and second derivatives of
//! the state recursion, so they agree with resimulation finite differences up
//! to Monte Carlo noise and O(ε²) truncation.

pub mod moments;
pub mod paths;
pub mod sensitivity;
pub mod variational;

pub use moments::{empirical_moment, sensitivity_moment};
pub use paths::{simulate_paths, PathEnsemble};
pub use sensitivity::{
    propagate_second_sensitivity, propagate_sensitivity, DirSpec, SecondSensitivityEnsemble, SensitivityEnsemble,
};
pub use variational::{assemble_variational, VariationalCoefficients};
