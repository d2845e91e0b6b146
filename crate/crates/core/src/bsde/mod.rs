// SPDX-License-Identifier: MIT OR Apache-2.0

//! Regression-based backward solvers for linear BSDEs.
//!
//! ```text
//! −dy_t = (A_t y_t + Σ_j B^j_t z^j_t + f_t) dt − Σ_j z^j_t dW^j_t,   y_T = ξ
//! ```
//!
//! is discretized by the explicit least-squares Monte Carlo scheme
//!
//! ```text
//! ȳ_k  = E[y_{k+1} | X_k]
//! z^j_k = E[y_{k+1} ΔW^j_k | X_k] / dt
//! y_k  = ȳ_k + (A_k ȳ_k + Σ_j B^j_k z^j_k + f_k) dt
//! ```
//!
//! with conditional expectations replaced by ridge regressions on a quadratic
//! polynomial basis of the state. Evaluating the driver at `ȳ_k` (rather than
//! regressing `A_k y_{k+1}`) makes the discrete duality with the Euler
//! tangent recursion exact, so adjoint-based derivatives differ from
//! sensitivity-based ones only through regression error.

pub mod adjoint;
pub mod apriori;
pub mod basis;
pub mod duality;
pub mod linear;

pub use adjoint::{
    solve_adjoint, solve_second_adjoint, AdjointSolution, FirstAdjoint, SecondAdjoint, SecondAdjointSolution,
};
pub use apriori::{apriori_bound_check, coefficient_bound, AprioriConstants, AprioriReport};
pub use basis::{FittedBasis, RegressionBasis};
pub use duality::{
    trace_duality_residual, DeterministicMatrix, MatrixProcess, OuterProductProcess, SecondAdjointProcess,
    TraceDualityReport,
};
pub use linear::{solve_linear_bsde, BsdeSolution, LinearBsde, MatrixLinearBsde, StepDiagnostics};
