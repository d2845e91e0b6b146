// SPDX-License-Identifier: MIT OR Apache-2.0

//! Linear-quadratic game with weakly coupled agents.
//!
//! ```text
//! dX_i = (A_i X_i + Ā_i x̄ + B_i u_i + b_i) dt + (C_i X_i + C̄_i x̄ + D_i u_i + σ_i) dW^i
//! f_i  = ½ [ Q̂_i (x_i − x̄)² + Q̄_i x̄² + R_i u_i² ]
//! g_i  = ½ [ G_i (x_i − x̄)² + Ḡ_i x̄² ]
//! ```
//!
//! With `v_i = e_i − 𝟙/N` the cost Hessians are `Q̂_i v_i v_iᵀ + Q̄_i 𝟙𝟙ᵀ/N²`;
//! the cost-gap sup-norms of the ledger are therefore exact constants. With
//! `Q̄ = Ḡ = 0` this is the classical weakly-coupled example, which is a
//! potential game whenever `Q̂_i` and `G_i` do not depend on `i`.

use crate::app::presets::{mean, require, PlayerParam};
use crate::error::Result;
use crate::model::{
    CoefFirst, CoefSecond, ConstantLedger, CostFirst, CostSecond, GameSpec, GapNorms, InitialLaw, RunningCost,
    StateCoefficient, TerminalCost,
};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// `φ_i = x_i·k_x + x̄·k_y + u·k_u + c` with per-player coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineCoefficient {
    pub kx: Vec<f64>,
    pub ky: Vec<f64>,
    pub ku: Vec<f64>,
    pub c: Vec<f64>,
}

impl AffineCoefficient {
    pub fn constant(c: Vec<f64>) -> Self {
        let n = c.len();
        Self {
            kx: vec![0.0; n],
            ky: vec![0.0; n],
            ku: vec![0.0; n],
            c,
        }
    }
}

impl StateCoefficient for AffineCoefficient {
    fn value(&self, i: usize, _t: f64, x: f64, y: &[f64], u: f64) -> f64 {
        self.kx[i] * x + self.ky[i] * mean(y) + self.ku[i] * u + self.c[i]
    }

    fn values(&self, _t: f64, y: &[f64], u: &[f64], out: &mut [f64]) {
        let m = mean(y);
        for i in 0..y.len() {
            out[i] = self.kx[i] * y[i] + self.ky[i] * m + self.ku[i] * u[i] + self.c[i];
        }
    }

    fn first(&self, i: usize, t: f64, x: f64, y: &[f64], u: f64, out: &mut CoefFirst) {
        out.value = self.value(i, t, x, y, u);
        out.dx = self.kx[i];
        out.du = self.ku[i];
        out.dy.fill(self.ky[i] / y.len() as f64);
    }

    fn second(&self, _: usize, _: f64, _: f64, _: &[f64], _: f64, out: &mut CoefSecond) {
        out.clear();
    }

    fn is_affine(&self) -> bool {
        true
    }
}

/// `f_i = ½[Q̂_i(y_i − ȳ)² + Q̄_i ȳ² + R_i u_i²]`, `g_i = ½[G_i(y_i − ȳ)² + Ḡ_i ȳ²]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCost {
    pub q_hat: Vec<f64>,
    pub q_bar: Vec<f64>,
    pub r: Vec<f64>,
    pub g: Vec<f64>,
    pub g_bar: Vec<f64>,
}

#[inline]
fn v_entry(i: usize, k: usize, n: usize) -> f64 {
    f64::from(u8::from(i == k)) - 1.0 / n as f64
}

fn quad_grad(w_dev: f64, w_mean: f64, i: usize, y: &[f64], out: &mut [f64]) {
    let n = y.len();
    let m = mean(y);
    let dev = y[i] - m;
    for (k, o) in out.iter_mut().enumerate() {
        *o = w_dev * dev * v_entry(i, k, n) + w_mean * m / n as f64;
    }
}

fn quad_hess(w_dev: f64, w_mean: f64, i: usize, n: usize, out: &mut [f64]) {
    let nf = n as f64;
    for k in 0..n {
        for l in 0..n {
            out[k * n + l] = w_dev * v_entry(i, k, n) * v_entry(i, l, n) + w_mean / (nf * nf);
        }
    }
}

impl RunningCost for QuadraticCost {
    fn value(&self, i: usize, _t: f64, y: &[f64], u: &[f64]) -> f64 {
        let m = mean(y);
        0.5 * (self.q_hat[i] * (y[i] - m).powi(2) + self.q_bar[i] * m * m + self.r[i] * u[i] * u[i])
    }

    fn values(&self, _t: f64, y: &[f64], u: &[f64], out: &mut [f64]) {
        let m = mean(y);
        for (i, o) in out.iter_mut().enumerate() {
            *o = 0.5 * (self.q_hat[i] * (y[i] - m).powi(2) + self.q_bar[i] * m * m + self.r[i] * u[i] * u[i]);
        }
    }

    fn first(&self, i: usize, t: f64, y: &[f64], u: &[f64], out: &mut CostFirst) {
        out.value = RunningCost::value(self, i, t, y, u);
        quad_grad(self.q_hat[i], self.q_bar[i], i, y, &mut out.dy);
        out.du.fill(0.0);
        out.du[i] = self.r[i] * u[i];
    }

    fn second(&self, i: usize, _t: f64, y: &[f64], _u: &[f64], out: &mut CostSecond) {
        let n = y.len();
        quad_hess(self.q_hat[i], self.q_bar[i], i, n, &mut out.dyy);
        out.dyu.fill(0.0);
        out.duu.fill(0.0);
        out.duu[i * n + i] = self.r[i];
    }
}

impl TerminalCost for QuadraticCost {
    fn value(&self, i: usize, y: &[f64]) -> f64 {
        let m = mean(y);
        0.5 * (self.g[i] * (y[i] - m).powi(2) + self.g_bar[i] * m * m)
    }

    fn values(&self, y: &[f64], out: &mut [f64]) {
        let m = mean(y);
        for (i, o) in out.iter_mut().enumerate() {
            *o = 0.5 * (self.g[i] * (y[i] - m).powi(2) + self.g_bar[i] * m * m);
        }
    }

    fn first(&self, i: usize, y: &[f64], out: &mut [f64]) {
        quad_grad(self.g[i], self.g_bar[i], i, y, out);
    }

    fn second(&self, i: usize, y: &[f64], out: &mut [f64]) {
        quad_hess(self.g[i], self.g_bar[i], i, y.len(), out);
    }
}

impl QuadraticCost {
    /// Exact cost-gap sup-norms for the ordered pair `(i, j)`.
    pub fn gap_norms(&self, i: usize, j: usize, n: usize) -> GapNorms {
        let mut gn = GapNorms::zeros(n);
        if i == j {
            return gn;
        }
        let mut hi = vec![0.0; n * n];
        let mut hj = vec![0.0; n * n];
        quad_hess(self.q_hat[i], self.q_bar[i], i, n, &mut hi);
        quad_hess(self.q_hat[j], self.q_bar[j], j, n, &mut hj);
        for (o, (a, b)) in gn.fxx.iter_mut().zip(hi.iter().zip(&hj)) {
            *o = (a - b).abs();
        }
        quad_hess(self.g[i], self.g_bar[i], i, n, &mut hi);
        quad_hess(self.g[j], self.g_bar[j], j, n, &mut hj);
        for (o, (a, b)) in gn.gxx.iter_mut().zip(hi.iter().zip(&hj)) {
            *o = (a - b).abs();
        }
        gn.fuu[i * n + i] = self.r[i].abs();
        gn.fuu[j * n + j] = self.r[j].abs();
        gn
    }

    /// Gap table for all ordered pairs.
    pub fn gap_table(&self, n: usize) -> Vec<GapNorms> {
        (0..n * n).map(|ij| self.gap_norms(ij / n, ij % n, n)).collect()
    }
}

/// Parameters of the LQ preset (per-player values).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LqParams {
    pub a: PlayerParam,
    pub a_bar: PlayerParam,
    pub b: PlayerParam,
    pub drift_shift: PlayerParam,
    pub c: PlayerParam,
    pub c_bar: PlayerParam,
    pub d: PlayerParam,
    pub sigma: PlayerParam,
    pub q_hat: PlayerParam,
    pub q_bar: PlayerParam,
    pub r: PlayerParam,
    pub g: PlayerParam,
    pub g_bar: PlayerParam,
    pub x0_mean: PlayerParam,
    pub x0_std: PlayerParam,
}

impl Default for LqParams {
    fn default() -> Self {
        Self {
            a: PlayerParam::Spread { lo: -0.6, hi: -0.2 },
            a_bar: 0.0.into(),
            b: 1.0.into(),
            drift_shift: 0.0.into(),
            c: 0.0.into(),
            c_bar: 0.0.into(),
            d: 0.0.into(),
            sigma: 0.3.into(),
            q_hat: 1.0.into(),
            q_bar: 0.0.into(),
            r: 1.0.into(),
            g: 1.0.into(),
            g_bar: 0.0.into(),
            x0_mean: PlayerParam::Spread { lo: -0.5, hi: 0.5 },
            x0_std: 0.2.into(),
        }
    }
}

/// Build the LQ game and its exact ledger.
pub fn build_lq_game(p: &LqParams, n: usize, horizon: f64) -> Result<(GameSpec, ConstantLedger)> {
    let r = |x: &PlayerParam, name: &str| x.resolve(n, name);
    let (a, a_bar, b, shift) = (
        r(&p.a, "a")?,
        r(&p.a_bar, "a_bar")?,
        r(&p.b, "b")?,
        r(&p.drift_shift, "drift_shift")?,
    );
    let (c, c_bar, d, sigma) = (
        r(&p.c, "c")?,
        r(&p.c_bar, "c_bar")?,
        r(&p.d, "d")?,
        r(&p.sigma, "sigma")?,
    );
    let cost = QuadraticCost {
        q_hat: r(&p.q_hat, "q_hat")?,
        q_bar: r(&p.q_bar, "q_bar")?,
        r: r(&p.r, "r")?,
        g: r(&p.g, "g")?,
        g_bar: r(&p.g_bar, "g_bar")?,
    };
    require(&cost.q_hat, "q_hat", "≥ 0", |x| x >= 0.0)?;
    require(&cost.q_bar, "q_bar", "≥ 0", |x| x >= 0.0)?;
    require(&cost.r, "r", "> 0", |x| x > 0.0)?;
    require(&cost.g, "g", "≥ 0", |x| x >= 0.0)?;
    require(&cost.g_bar, "g_bar", "≥ 0", |x| x >= 0.0)?;
    let x0_std = r(&p.x0_std, "x0_std")?;
    require(&x0_std, "x0_std", "≥ 0", |x| x >= 0.0)?;
    let maxabs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let l_b = (0..n).fold(0.0f64, |m, i| m.max(a[i].abs() + b[i].abs()).max(shift[i].abs()));
    let l_s = (0..n).fold(0.0f64, |m, i| m.max(c[i].abs() + d[i].abs()).max(sigma[i].abs()));
    let mut ledger = ConstantLedger::new(n, l_b, maxabs(&a_bar), l_s, maxabs(&c_bar));
    ledger.gaps = cost.gap_table(n);
    let cost = Arc::new(cost);
    let spec = GameSpec {
        name: "lq".into(),
        n_players: n,
        horizon,
        initial: InitialLaw::gaussian(r(&p.x0_mean, "x0_mean")?, x0_std),
        drift: Arc::new(AffineCoefficient {
            kx: a,
            ky: a_bar,
            ku: b,
            c: shift,
        }),
        diffusion: Arc::new(AffineCoefficient {
            kx: c,
            ky: c_bar,
            ku: d,
            c: sigma,
        }),
        running: cost.clone(),
        terminal: cost,
        common_noise: false,
    };
    Ok((spec, ledger))
}
