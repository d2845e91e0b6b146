// SPDX-License-Identifier: MIT OR Apache-2.0

//! Open-loop controls and perturbation directions.
//!
//! A scalar control is a finite sum of terms evaluated at grid node `t_k`
//! using only noise observed up to `t_k`:
//!
//! ```text
//! u(t_k) = Σ c·φ(t_k) + Σ c'·W^j_{t_k}
//! φ ∈ {1, t/T, sin(2πt/T), 1[t < T/2], tabulated}
//! ```
//!
//! Sums and scalar multiples of controls are again controls, so the type
//! spans the linear space in which perturbation directions live. Brownian
//! terms use the cumulative increments strictly before step `k`, which keeps
//! every control adapted.

use crate::model::grid::TimeGrid;
use crate::model::noise::NoiseBundle;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// One additive term of a scalar control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlTerm {
    /// `c`
    Constant { coef: f64 },
    /// `c·t/T`
    Linear { coef: f64 },
    /// `c·sin(2πt/T)`
    Sine { coef: f64 },
    /// `c·1[t < T/2]`
    Indicator { coef: f64 },
    /// `c·W^driver_t` (adapted, path dependent)
    Brownian { driver: usize, coef: f64 },
    /// Node values `v_k`; nodes past the end reuse the last value.
    Tabulated { coef: f64, values: Arc<Vec<f64>> },
}

impl ControlTerm {
    fn scaled(&self, s: f64) -> ControlTerm {
        match self {
            ControlTerm::Constant { coef } => ControlTerm::Constant { coef: coef * s },
            ControlTerm::Linear { coef } => ControlTerm::Linear { coef: coef * s },
            ControlTerm::Sine { coef } => ControlTerm::Sine { coef: coef * s },
            ControlTerm::Indicator { coef } => ControlTerm::Indicator { coef: coef * s },
            ControlTerm::Brownian { driver, coef } => ControlTerm::Brownian {
                driver: *driver,
                coef: coef * s,
            },
            ControlTerm::Tabulated { coef, values } => ControlTerm::Tabulated {
                coef: coef * s,
                values: values.clone(),
            },
        }
    }

    /// Deterministic part at node `k` (Brownian terms contribute zero).
    fn deterministic_value(&self, grid: &TimeGrid, k: usize) -> f64 {
        let t = grid.t(k);
        let tt = grid.horizon;
        match self {
            ControlTerm::Constant { coef } => *coef,
            ControlTerm::Linear { coef } => coef * t / tt,
            ControlTerm::Sine { coef } => coef * (std::f64::consts::TAU * t / tt).sin(),
            ControlTerm::Indicator { coef } => {
                if t < 0.5 * tt {
                    *coef
                } else {
                    0.0
                }
            }
            ControlTerm::Brownian { .. } => 0.0,
            ControlTerm::Tabulated { coef, values } => {
                if values.is_empty() {
                    0.0
                } else {
                    coef * values[k.min(values.len() - 1)]
                }
            }
        }
    }
}

/// A scalar open-loop control: a sum of terms.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScalarControl {
    pub terms: Vec<ControlTerm>,
}

impl ScalarControl {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: vec![ControlTerm::Constant { coef: c }],
        }
    }

    pub fn from_terms(terms: Vec<ControlTerm>) -> Self {
        Self { terms }
    }

    pub fn tabulated(values: Vec<f64>) -> Self {
        Self {
            terms: vec![ControlTerm::Tabulated {
                coef: 1.0,
                values: Arc::new(values),
            }],
        }
    }

    /// Scalar multiple `s·u`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|t| t.scaled(s)).collect(),
        }
    }

    /// Sum `u + v`.
    pub fn plus(&self, other: &ScalarControl) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self { terms }
    }

    /// Linear combination `a·u + b·v`.
    pub fn combine(a: f64, u: &ScalarControl, b: f64, v: &ScalarControl) -> Self {
        u.scaled(a).plus(&v.scaled(b))
    }

    /// True when no term depends on the noise.
    pub fn is_deterministic(&self) -> bool {
        !self.terms.iter().any(|t| matches!(t, ControlTerm::Brownian { .. }))
    }

    /// Value at node `k` given the cumulative Brownian path `w_cum` at `t_k`.
    pub fn value(&self, grid: &TimeGrid, k: usize, w_cum: &[f64]) -> f64 {
        let mut v = 0.0;
        for t in &self.terms {
            v += match t {
                ControlTerm::Brownian { driver, coef } => coef * w_cum.get(*driver).copied().unwrap_or(0.0),
                other => other.deterministic_value(grid, k),
            };
        }
        v
    }

    /// Deterministic node values `k = 0..=M` (Brownian terms excluded).
    pub fn tabulate(&self, grid: &TimeGrid) -> Vec<f64> {
        (0..=grid.n_steps)
            .map(|k| self.terms.iter().map(|t| t.deterministic_value(grid, k)).sum())
            .collect()
    }

    /// `E ∫ |u|^p dt` with left-endpoint quadrature (deterministic part only).
    pub fn hp_norm_pow(&self, grid: &TimeGrid, p: f64) -> f64 {
        let tab = self.tabulate(grid);
        tab[..grid.n_steps].iter().map(|v| v.abs().powf(p)).sum::<f64>() * grid.dt
    }
}

/// One scalar control per player.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlProfile {
    pub players: Vec<ScalarControl>,
}

impl ControlProfile {
    pub fn zero(n: usize) -> Self {
        Self {
            players: vec![ScalarControl::zero(); n],
        }
    }

    pub fn new(players: Vec<ScalarControl>) -> Self {
        Self { players }
    }

    pub fn n_players(&self) -> usize {
        self.players.len()
    }

    pub fn is_deterministic(&self) -> bool {
        self.players.iter().all(ScalarControl::is_deterministic)
    }

    /// Pointwise combination `a·u + b·v`.
    pub fn combine(a: f64, u: &ControlProfile, b: f64, v: &ControlProfile) -> Self {
        Self {
            players: u
                .players
                .iter()
                .zip(&v.players)
                .map(|(x, y)| ScalarControl::combine(a, x, b, y))
                .collect(),
        }
    }

    /// Copy with player `h`'s control replaced by `u_h + s·d`.
    pub fn perturbed(&self, h: usize, s: f64, d: &ScalarControl) -> Self {
        let mut out = self.clone();
        out.players[h] = out.players[h].plus(&d.scaled(s));
        out
    }

    /// Copy with player `h`'s control replaced by `c`.
    pub fn with_player(&self, h: usize, c: ScalarControl) -> Self {
        let mut out = self.clone();
        out.players[h] = c;
        out
    }

    /// Tabulate into a per-path evaluator.
    pub fn tabulate(&self, grid: &TimeGrid) -> TabulatedProfile {
        let n = self.players.len();
        let m = grid.n_steps;
        let mut values = vec![0.0; (m + 1) * n];
        for (i, c) in self.players.iter().enumerate() {
            for (k, v) in c.tabulate(grid).into_iter().enumerate() {
                values[k * n + i] = v;
            }
        }
        let mut brownian = Vec::new();
        for (i, c) in self.players.iter().enumerate() {
            for t in &c.terms {
                if let ControlTerm::Brownian { driver, coef } = t {
                    brownian.push((i, *driver, *coef));
                }
            }
        }
        TabulatedProfile {
            n_players: n,
            values,
            brownian,
        }
    }

    /// Monte Carlo estimate of `‖u_i‖_{ℋ²} = sqrt(E ∫ u_i² dt)` per player.
    pub fn h2_norm_estimate(&self, grid: &TimeGrid, noise: &NoiseBundle) -> Vec<f64> {
        let tab = self.tabulate(grid);
        let n = self.players.len();
        let mut acc = vec![0.0; n];
        let mut w = vec![0.0; noise.n_drivers];
        let mut u = vec![0.0; n];
        for p in 0..noise.n_paths {
            w.fill(0.0);
            for k in 0..grid.n_steps {
                tab.eval(k, &w, &mut u);
                for i in 0..n {
                    acc[i] += u[i] * u[i] * grid.dt;
                }
                for (wj, dw) in w.iter_mut().zip(noise.dw(p, k)) {
                    *wj += dw;
                }
            }
        }
        acc.iter().map(|a| (a / noise.n_paths as f64).sqrt()).collect()
    }
}

/// Controls evaluated on a grid: deterministic node values plus Brownian terms.
#[derive(Debug, Clone)]
pub struct TabulatedProfile {
    pub n_players: usize,
    /// `[node][player]`
    pub values: Vec<f64>,
    /// `(player, driver, coefficient)` for every Brownian term.
    pub brownian: Vec<(usize, usize, f64)>,
}

impl TabulatedProfile {
    /// Controls at node `k` given the cumulative Brownian values at `t_k`.
    #[inline]
    pub fn eval(&self, k: usize, w_cum: &[f64], out: &mut [f64]) {
        let n = self.n_players;
        out.copy_from_slice(&self.values[k * n..(k + 1) * n]);
        for &(i, j, c) in &self.brownian {
            out[i] += c * w_cum[j];
        }
    }

    pub fn is_deterministic(&self) -> bool {
        self.brownian.is_empty()
    }
}

/// Fixed dictionary of perturbation directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Constant,
    Linear,
    Sine,
    Indicator,
}

impl Direction {
    /// The four dictionary directions, in report order.
    pub const ALL: [Direction; 4] = [
        Direction::Constant,
        Direction::Linear,
        Direction::Sine,
        Direction::Indicator,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Direction::Constant => "const",
            Direction::Linear => "lin",
            Direction::Sine => "sin",
            Direction::Indicator => "ind",
        }
    }

    pub fn control(&self) -> ScalarControl {
        let coef = 1.0;
        ScalarControl::from_terms(vec![match self {
            Direction::Constant => ControlTerm::Constant { coef },
            Direction::Linear => ControlTerm::Linear { coef },
            Direction::Sine => ControlTerm::Sine { coef },
            Direction::Indicator => ControlTerm::Indicator { coef },
        }])
    }
}

/// Per-player control built from dictionary coefficients `[c, c_lin, c_sin, c_ind]`.
pub fn dictionary_control(coefs: &[f64]) -> ScalarControl {
    let mut terms = Vec::new();
    for (d, &c) in Direction::ALL.iter().zip(coefs) {
        if c != 0.0 {
            terms.extend(d.control().scaled(c).terms);
        }
    }
    ScalarControl::from_terms(terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combination_is_pointwise() {
        let g = TimeGrid::new(2.0, 8).unwrap();
        let u = Direction::Sine.control();
        let v = Direction::Indicator.control();
        let w = ScalarControl::combine(2.0, &u, -3.0, &v);
        let (tu, tv, tw) = (u.tabulate(&g), v.tabulate(&g), w.tabulate(&g));
        for k in 0..=8 {
            assert!((tw[k] - (2.0 * tu[k] - 3.0 * tv[k])).abs() < 1e-15);
        }
    }

    #[test]
    fn indicator_half_open() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        assert_eq!(
            Direction::Indicator.control().tabulate(&g),
            vec![1.0, 1.0, 0.0, 0.0, 0.0]
        );
    }
}
