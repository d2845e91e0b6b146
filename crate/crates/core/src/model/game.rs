// SPDX-License-Identifier: MIT OR Apache-2.0

//! Game definition: coefficient and cost evaluators with analytic partials.
//!
//! ```text
//! dX_i = b_i(t, X_i, X, u_i) dt + σ_i(t, X_i, X, u_i) dW^i  (+ dW^0)
//! V_i(u) = E[ ∫_0^T f_i(t, X_t, u_t) dt + g_i(X_T) ]
//! ```
//!
//! The private state `x_i` enters a coefficient both as the explicit first
//! argument and as component `i` of `y`; the total derivative with respect to
//! the state `X_m` is therefore `δ_{im}·∂_x + ∂_{y_m}`. Evaluators write into
//! caller-owned buffers so the simulation inner loops never allocate.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Value and first partials of a state coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefFirst {
    pub value: f64,
    pub dx: f64,
    pub du: f64,
    /// `∂_{y_j}`, length N.
    pub dy: Vec<f64>,
}

impl CoefFirst {
    pub fn new(n: usize) -> Self {
        Self {
            value: 0.0,
            dx: 0.0,
            du: 0.0,
            dy: vec![0.0; n],
        }
    }
}

/// Second partials of a state coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefSecond {
    pub dxx: f64,
    pub dxu: f64,
    pub duu: f64,
    /// `∂²_{x y_j}`, length N.
    pub dxy: Vec<f64>,
    /// `∂²_{u y_j}`, length N.
    pub duy: Vec<f64>,
    /// `∂²_{y_j y_k}`, row-major N×N.
    pub dyy: Vec<f64>,
}

impl CoefSecond {
    pub fn new(n: usize) -> Self {
        Self {
            dxx: 0.0,
            dxu: 0.0,
            duu: 0.0,
            dxy: vec![0.0; n],
            duy: vec![0.0; n],
            dyy: vec![0.0; n * n],
        }
    }

    pub fn clear(&mut self) {
        self.dxx = 0.0;
        self.dxu = 0.0;
        self.duu = 0.0;
        self.dxy.fill(0.0);
        self.duy.fill(0.0);
        self.dyy.fill(0.0);
    }
}

/// Value and first partials of a running cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CostFirst {
    pub value: f64,
    /// `∂_{y_k} f`, length N.
    pub dy: Vec<f64>,
    /// `∂_{u_k} f`, length N.
    pub du: Vec<f64>,
}

impl CostFirst {
    pub fn new(n: usize) -> Self {
        Self {
            value: 0.0,
            dy: vec![0.0; n],
            du: vec![0.0; n],
        }
    }
}

/// Second partials of a running cost, each row-major N×N.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSecond {
    pub dyy: Vec<f64>,
    /// `[y index][u index]`
    pub dyu: Vec<f64>,
    pub duu: Vec<f64>,
}

impl CostSecond {
    pub fn new(n: usize) -> Self {
        Self {
            dyy: vec![0.0; n * n],
            dyu: vec![0.0; n * n],
            duu: vec![0.0; n * n],
        }
    }

    pub fn clear(&mut self) {
        self.dyy.fill(0.0);
        self.dyu.fill(0.0);
        self.duu.fill(0.0);
    }
}

/// Per-player drift or diffusion coefficient `φ_i(t, x, y, u)`.
pub trait StateCoefficient: Send + Sync {
    fn value(&self, i: usize, t: f64, x: f64, y: &[f64], u: f64) -> f64;
    fn first(&self, i: usize, t: f64, x: f64, y: &[f64], u: f64, out: &mut CoefFirst);
    fn second(&self, i: usize, t: f64, x: f64, y: &[f64], u: f64, out: &mut CoefSecond);
    /// `out[i] = φ_i(t, y_i, y, u_i)` for every player; override to share
    /// work across players.
    fn values(&self, t: f64, y: &[f64], u: &[f64], out: &mut [f64]) {
        for i in 0..y.len() {
            out[i] = self.value(i, t, y[i], y, u[i]);
        }
    }
    /// True when every second partial vanishes identically.
    fn is_affine(&self) -> bool {
        false
    }
}

/// Per-player running cost `f_i(t, y, u)`.
pub trait RunningCost: Send + Sync {
    fn value(&self, i: usize, t: f64, y: &[f64], u: &[f64]) -> f64;
    fn first(&self, i: usize, t: f64, y: &[f64], u: &[f64], out: &mut CostFirst);
    fn second(&self, i: usize, t: f64, y: &[f64], u: &[f64], out: &mut CostSecond);
    /// `out[i] = f_i(t, y, u)` for every player.
    fn values(&self, t: f64, y: &[f64], u: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.value(i, t, y, u);
        }
    }
}

/// Per-player terminal cost `g_i(y)`.
pub trait TerminalCost: Send + Sync {
    fn value(&self, i: usize, y: &[f64]) -> f64;
    /// `out[i] = g_i(y)` for every player.
    fn values(&self, y: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.value(i, y);
        }
    }
    /// Gradient, length N.
    fn first(&self, i: usize, y: &[f64], out: &mut [f64]);
    /// Hessian, row-major N×N.
    fn second(&self, i: usize, y: &[f64], out: &mut [f64]);
}

/// Independent Gaussian initial law `ξ_i = μ_i + s_i·Z_i` (deterministic if `s_i = 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialLaw {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl InitialLaw {
    pub fn deterministic(mean: Vec<f64>) -> Self {
        let n = mean.len();
        Self {
            mean,
            std: vec![0.0; n],
        }
    }

    pub fn gaussian(mean: Vec<f64>, std: Vec<f64>) -> Self {
        Self { mean, std }
    }

    #[inline]
    pub fn sample(&self, normals: &[f64], out: &mut [f64]) {
        for i in 0..out.len() {
            out[i] = self.mean[i] + self.std[i] * normals[i];
        }
    }

    /// `E|ξ_i|^p`.
    pub fn abs_moment(&self, i: usize, p: f64) -> f64 {
        gaussian_abs_moment(self.mean[i], self.std[i], p)
    }
}

/// `E|μ + sZ|^p` for a standard normal `Z`: exact binomial expansion for even
/// integer `p`, composite Simpson quadrature otherwise.
pub fn gaussian_abs_moment(mu: f64, s: f64, p: f64) -> f64 {
    if s == 0.0 {
        return mu.abs().powf(p);
    }
    if p >= 0.0 && p.fract() == 0.0 && (p as u64).is_multiple_of(2) {
        let pe = p as u64;
        let mut total = 0.0;
        let mut binom = 1.0;
        let mut dfact = 1.0; // (k-1)!! for even k
        for k in 0..=pe {
            if k > 0 {
                binom *= (pe - k + 1) as f64 / k as f64;
            }
            if k % 2 == 0 {
                if k >= 2 {
                    dfact *= (k - 1) as f64;
                }
                total += binom * mu.powi((pe - k) as i32) * s.powi(k as i32) * dfact;
            }
        }
        return total;
    }
    let n = 8000usize;
    let (a, b) = (-12.0, 12.0);
    let h = (b - a) / n as f64;
    let phi = |z: f64| (-0.5 * z * z).exp() / (std::f64::consts::TAU).sqrt();
    let g = |z: f64| (mu + s * z).abs().powf(p) * phi(z);
    let mut acc = g(a) + g(b);
    for k in 1..n {
        let z = a + k as f64 * h;
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * g(z);
    }
    acc * h / 3.0
}

/// Full N-player game.
#[derive(Clone)]
pub struct GameSpec {
    pub name: String,
    pub n_players: usize,
    pub horizon: f64,
    pub initial: InitialLaw,
    pub drift: Arc<dyn StateCoefficient>,
    pub diffusion: Arc<dyn StateCoefficient>,
    pub running: Arc<dyn RunningCost>,
    pub terminal: Arc<dyn TerminalCost>,
    /// When set, every state also receives the increment of a shared driver.
    pub common_noise: bool,
}

impl fmt::Debug for GameSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GameSpec")
            .field("name", &self.name)
            .field("n_players", &self.n_players)
            .field("horizon", &self.horizon)
            .field("common_noise", &self.common_noise)
            .finish()
    }
}

impl GameSpec {
    /// Number of Brownian drivers (N, plus one for the common noise).
    pub fn n_drivers(&self) -> usize {
        self.n_players + usize::from(self.common_noise)
    }

    /// True when drift and diffusion are affine, so second-order
    /// sensitivities vanish.
    pub fn dynamics_affine(&self) -> bool {
        self.drift.is_affine() && self.diffusion.is_affine()
    }
}

/// Identically zero coefficient or cost; useful for tests and toy games.
#[derive(Debug, Clone, Copy, Default)]
pub struct Zero;

impl StateCoefficient for Zero {
    fn value(&self, _: usize, _: f64, _: f64, _: &[f64], _: f64) -> f64 {
        0.0
    }
    fn first(&self, _: usize, _: f64, _: f64, _: &[f64], _: f64, out: &mut CoefFirst) {
        out.value = 0.0;
        out.dx = 0.0;
        out.du = 0.0;
        out.dy.fill(0.0);
    }
    fn second(&self, _: usize, _: f64, _: f64, _: &[f64], _: f64, out: &mut CoefSecond) {
        out.clear();
    }
    fn is_affine(&self) -> bool {
        true
    }
}

impl RunningCost for Zero {
    fn value(&self, _: usize, _: f64, _: &[f64], _: &[f64]) -> f64 {
        0.0
    }
    fn first(&self, _: usize, _: f64, _: &[f64], _: &[f64], out: &mut CostFirst) {
        out.value = 0.0;
        out.dy.fill(0.0);
        out.du.fill(0.0);
    }
    fn second(&self, _: usize, _: f64, _: &[f64], _: &[f64], out: &mut CostSecond) {
        out.clear();
    }
}

impl TerminalCost for Zero {
    fn value(&self, _: usize, _: &[f64]) -> f64 {
        0.0
    }
    fn first(&self, _: usize, _: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn second(&self, _: usize, _: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_moments() {
        assert!((gaussian_abs_moment(1.0, 2.0, 2.0) - 5.0).abs() < 1e-12);
        // E(μ+sZ)^4 = μ^4 + 6μ²s² + 3s^4
        assert!((gaussian_abs_moment(1.0, 2.0, 4.0) - (1.0 + 24.0 + 48.0)).abs() < 1e-12);
        // E|Z| = sqrt(2/π)
        let e1 = gaussian_abs_moment(0.0, 1.0, 1.0);
        assert!((e1 - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-6);
    }
}
