// SPDX-License-Identifier: MIT OR Apache-2.0

//! Mean-field interaction with a common cost core.
//!
//! ```text
//! dX_i = (−a_i X_i + κ tanh(x̄) + B_i u_i) dt + (s_i + c tanh(x̄)) dW^i
//! f_i  = ½ q (x_i − x̄)² + ½ r_i u_i² + ½ w_i x̄²
//! g_i  = ½ G (x_i − x̄)² + ½ ω_i x̄²
//! ```
//!
//! The cost gaps only involve the player weights on `x̄²`, whose Hessian is
//! `𝟙𝟙ᵀ/N²`, so every second-order gap norm is `O(1/N²)` and the α bound
//! scales like `C/N`.

use crate::app::presets::{dsech2, mean, require, sech2, th, PlayerParam, QuadraticCost};
use crate::error::Result;
use crate::model::{CoefFirst, CoefSecond, ConstantLedger, GameSpec, InitialLaw, StateCoefficient};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// `φ_i = k_x[i]·x + k_u[i]·u + k_t·tanh(ȳ) + c[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TanhMeanCoefficient {
    pub kx: Vec<f64>,
    pub ku: Vec<f64>,
    pub kt: f64,
    pub c: Vec<f64>,
}

impl StateCoefficient for TanhMeanCoefficient {
    fn value(&self, i: usize, _t: f64, x: f64, y: &[f64], u: f64) -> f64 {
        self.kx[i] * x + self.ku[i] * u + self.kt * th(mean(y)) + self.c[i]
    }

    fn values(&self, _t: f64, y: &[f64], u: &[f64], out: &mut [f64]) {
        let shared = if self.kt == 0.0 { 0.0 } else { self.kt * th(mean(y)) };
        for i in 0..y.len() {
            out[i] = self.kx[i] * y[i] + self.ku[i] * u[i] + shared + self.c[i];
        }
    }

    fn first(&self, i: usize, t: f64, x: f64, y: &[f64], u: f64, out: &mut CoefFirst) {
        out.value = self.value(i, t, x, y, u);
        out.dx = self.kx[i];
        out.du = self.ku[i];
        out.dy.fill(self.kt * sech2(mean(y)) / y.len() as f64);
    }

    fn second(&self, _i: usize, _t: f64, _x: f64, y: &[f64], _u: f64, out: &mut CoefSecond) {
        out.clear();
        let n = y.len() as f64;
        out.dyy.fill(self.kt * dsech2(mean(y)) / (n * n));
    }

    fn is_affine(&self) -> bool {
        self.kt == 0.0
    }
}

/// Parameters of the mean-field preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeanFieldParams {
    pub a: PlayerParam,
    pub b: PlayerParam,
    pub kappa: f64,
    pub s: PlayerParam,
    pub c: f64,
    pub q: f64,
    pub r: PlayerParam,
    pub w: PlayerParam,
    pub g: f64,
    pub omega: PlayerParam,
    pub x0_mean: PlayerParam,
    pub x0_std: PlayerParam,
}

impl Default for MeanFieldParams {
    fn default() -> Self {
        Self {
            a: 0.5.into(),
            b: 1.0.into(),
            kappa: 0.3,
            s: 0.3.into(),
            c: 0.1,
            q: 1.0,
            r: 1.0.into(),
            w: PlayerParam::Spread { lo: 0.5, hi: 1.5 },
            g: 1.0,
            omega: PlayerParam::Spread { lo: 0.2, hi: 0.8 },
            x0_mean: PlayerParam::Spread { lo: -0.5, hi: 0.5 },
            x0_std: 0.2.into(),
        }
    }
}

/// Build the mean-field game and its exact ledger.
pub fn build_mean_field_game(p: &MeanFieldParams, n: usize, horizon: f64) -> Result<(GameSpec, ConstantLedger)> {
    let a = p.a.resolve(n, "a")?;
    let b = p.b.resolve(n, "b")?;
    let s = p.s.resolve(n, "s")?;
    let cost = QuadraticCost {
        q_hat: vec![p.q; n],
        q_bar: p.w.resolve(n, "w")?,
        r: p.r.resolve(n, "r")?,
        g: vec![p.g; n],
        g_bar: p.omega.resolve(n, "omega")?,
    };
    require(&[p.q, p.g], "q/g", "≥ 0", |x| x >= 0.0)?;
    require(&cost.r, "r", "> 0", |x| x > 0.0)?;
    require(&cost.q_bar, "w", "≥ 0", |x| x >= 0.0)?;
    require(&cost.g_bar, "omega", "≥ 0", |x| x >= 0.0)?;
    require(&[p.kappa, p.c], "kappa/c", "finite", f64::is_finite)?;
    let x0_std = p.x0_std.resolve(n, "x0_std")?;
    require(&x0_std, "x0_std", "≥ 0", |x| x >= 0.0)?;
    let l_b = (0..n).fold(0.0f64, |m, i| m.max(a[i].abs() + b[i].abs()));
    let l_s = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut ledger = ConstantLedger::new(n, l_b, p.kappa.abs(), l_s, p.c.abs());
    ledger.gaps = cost.gap_table(n);
    let cost = Arc::new(cost);
    let spec = GameSpec {
        name: "mean_field".into(),
        n_players: n,
        horizon,
        initial: InitialLaw::gaussian(p.x0_mean.resolve(n, "x0_mean")?, x0_std),
        drift: Arc::new(TanhMeanCoefficient {
            kx: a.iter().map(|v| -v).collect(),
            ku: b,
            kt: p.kappa,
            c: vec![0.0; n],
        }),
        diffusion: Arc::new(TanhMeanCoefficient {
            kx: vec![0.0; n],
            ku: vec![0.0; n],
            kt: p.c,
            c: s,
        }),
        running: cost.clone(),
        terminal: cost,
        common_noise: false,
    };
    Ok((spec, ledger))
}
