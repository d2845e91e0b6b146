// SPDX-License-Identifier: MIT OR Apache-2.0

//! Linear derivatives of the cost functionals by independent routes.
//!
//! ```text
//! δV_i/δu_h (u)(u')            first linear derivative along u'_h
//! δ²V_i/δu_hδu_ℓ (u)(u', u'')  second linear derivative, h ≠ ℓ
//! ```
//!
//! Routes:
//! - `FD`: central (mixed) differences of the cost under common random
//!   numbers, Richardson-extrapolated over ε ∈ {1e-2, 5e-3, 2.5e-3};
//! - `SENS`: expectation of the linearized cost along tangent processes;
//! - `BSDE`: duality with the first and second adjoint equations;
//! - `Z-ORACLE`: the second-order route through the second sensitivity `Z`.
//!
//! All time integrals use the left-endpoint rule, consistent with the Euler
//! filtration.

pub mod cost;
pub mod first;
pub mod second;

pub use cost::cost_value;
pub use first::{
    first_derivative_bsde, first_derivative_fd, first_derivative_sens, first_derivatives_bsde, first_derivatives_fd,
    first_derivatives_sens,
};
pub use second::{
    second_derivative_bsde, second_derivative_fd, second_derivative_z_oracle, second_derivatives_fd, vi_integrand,
    ViInputs,
};

use crate::stats::Estimate;
use serde::{Deserialize, Serialize};

/// Finite-difference step schedule (largest first).
pub const EPS_SCHEDULE: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// Smallest step of [`EPS_SCHEDULE`].
pub const EPS_MIN: f64 = 2.5e-3;

/// Route used to compute a derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "FD")]
    Fd,
    #[serde(rename = "SENS")]
    Sens,
    #[serde(rename = "BSDE")]
    Bsde,
    #[serde(rename = "Z-ORACLE")]
    ZOracle,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Fd => "FD",
            Method::Sens => "SENS",
            Method::Bsde => "BSDE",
            Method::ZOracle => "Z-ORACLE",
        }
    }
}

/// A derivative estimate with its standard error and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeEstimate {
    pub value: f64,
    pub std_error: f64,
    pub method: Method,
    /// Player whose cost is differentiated.
    pub player: usize,
    /// Perturbed players (`[h]` or `[h, ℓ]`).
    pub perturbed: Vec<usize>,
    /// Direction labels, filled by callers that know them.
    pub directions: Vec<String>,
    /// Finite-difference steps (empty for other routes).
    pub eps: Vec<f64>,
    /// Un-extrapolated difference quotients per step, for diagnostics.
    pub raw: Vec<Estimate>,
}

impl DerivativeEstimate {
    pub fn new(est: Estimate, method: Method, player: usize, perturbed: Vec<usize>) -> Self {
        Self {
            value: est.value,
            std_error: est.se,
            method,
            player,
            perturbed,
            directions: Vec::new(),
            eps: Vec::new(),
            raw: Vec::new(),
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate::new(self.value, self.std_error)
    }

    pub fn with_directions(mut self, dirs: &[&str]) -> Self {
        self.directions = dirs.iter().map(|s| s.to_string()).collect();
        self
    }

    /// `|self − other|` and the sum of the two standard errors.
    pub fn gap(&self, other: &DerivativeEstimate) -> (f64, f64) {
        ((self.value - other.value).abs(), self.std_error + other.std_error)
    }
}

/// Richardson combination `(4 D(ε/2) − D(ε)) / 3` of two central quotients.
#[inline]
pub fn richardson(d_eps: f64, d_half: f64) -> f64 {
    (4.0 * d_half - d_eps) / 3.0
}
