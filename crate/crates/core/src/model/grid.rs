// SPDX-License-Identifier: MIT OR Apache-2.0

//! Uniform time grid on `[0, T]`.
//!
//! ```text
//! dt = T / M,   t_k = k·dt  (k < M),   t_M = T exactly
//! ```

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Uniform discretization of the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub n_steps: usize,
    pub horizon: f64,
    pub dt: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::InvalidParameters("grid needs at least one step".into()));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParameters(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        Ok(Self {
            n_steps,
            horizon,
            dt: horizon / n_steps as f64,
        })
    }

    /// Node `t_k`; the last node is the horizon itself.
    #[inline]
    pub fn t(&self, k: usize) -> f64 {
        if k >= self.n_steps {
            self.horizon
        } else {
            k as f64 * self.dt
        }
    }

    /// All nodes `t_0, …, t_M`.
    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.t(k)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn last_node_is_horizon() {
        let g = TimeGrid::new(0.7, 3).unwrap();
        assert_eq!(g.t(3), 0.7);
        assert_eq!(g.nodes().len(), 4);
        assert!(TimeGrid::new(1.0, 0).is_err());
    }
}
