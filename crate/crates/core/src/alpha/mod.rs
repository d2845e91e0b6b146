// SPDX-License-Identifier: MIT OR Apache-2.0

//! Asymmetry, α estimates, the α-potential function and bound ledgers.
//!
//! ```text
//! A_ij(a, b) = δ²V_i/δu_i δu_j (u; a, b) − δ²V_j/δu_j δu_i (u; b, a)
//! α̂          = 2 · max_i Σ_{j≠i} max_{a,b} |E A_ij(a, b)|
//! Φ(a)       = ∫₀¹ Σ_j δV_j/δu_j (z + r(a − z); a_j − z_j) dr
//! ```
//!
//! - [`asymmetry`]: the asymmetry matrix by the FD, SENS and BSDE routes;
//! - [`bounds`]: closed-form constant ledgers bounding α and the moments;
//! - [`potential`]: Φ by Gauss–Legendre quadrature and deviation gaps;
//! - [`exploit`]: exploitability and a parametric minimizer of Φ;
//! - [`report`]: the empirical/theoretical α bracket.

pub mod asymmetry;
pub mod bounds;
pub mod exploit;
pub mod potential;
pub mod report;

pub use asymmetry::{
    asymmetry, asymmetry_bsde, asymmetry_fd, asymmetry_pair_fd, asymmetry_sens, AsymmetryEntry, AsymmetryMatrix,
};
pub use bounds::{
    cor2_bound, cor2_constants, lambda1, lq_display_bound, moment_bound_constants, no_diffusion_control_pair_bound,
    pair_bound, sensitivity_moment_bound, theoretical_alpha_bound, AlphaBound, BoundLedger, MomentConstants, PairBound,
    SensitivityMomentBound,
};
pub use exploit::{
    exploitability, family_profile, minimize_potential, optimization_slack, own_gradient, three_term_family, Deviation,
    Exploitability, MinimizerConfig, PotentialMinimizer,
};
pub use potential::{
    cost_differences, gauss_legendre, gradient_pairing, potential_deviation_gap, potential_value, DeviationGap,
    PotentialConfig, PotentialValue,
};
pub use report::{alpha_report, empirical_asymmetry, AlphaReport};
