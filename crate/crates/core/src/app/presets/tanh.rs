// SPDX-License-Identifier: MIT OR Apache-2.0

//! Nonlinear game with tanh couplings and control-dependent noise.
//!
//! ```text
//! b_i = −a_i x + 0.2 tanh x + γ tanh ȳ + B_i u (1 + η tanh ȳ)
//! σ_i = s_i + c tanh ȳ + D_i u + η_σ u tanh x
//! f_i = ½ q_i (y_i − ȳ)² + ½ r_i u_i² + ρ_i u_i tanh ȳ + λ_i log cosh y_i + χ u_i u_{i+1}
//! g_i = ½ G_i (y_i − ȳ)² + κ_i log cosh ȳ
//! ```
//!
//! (`i+1` is taken cyclically; the `χ` term is absent for a single player.)
//! Every second partial is nonzero somewhere, so this preset exercises all
//! terms of the second-order sensitivity and adjoint equations. The cost
//! gaps are not constant; the ledger fills them by sampling.

use crate::app::presets::{dsech2, log_cosh, mean, require, sech2, th, validation_box, PlayerParam, VALIDATION_U};
use crate::error::Result;
use crate::model::{
    CoefFirst, CoefSecond, ConstantLedger, CostFirst, CostSecond, GameSpec, InitialLaw, RunningCost, StateCoefficient,
    TerminalCost,
};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// `max |d/dz sech² z| = 4/(3√3)`.
const DSECH2_MAX: f64 = 0.769_800_358_919_501;
/// Weight of the private `tanh x` drift term.
const SELF_TANH: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
struct TanhDrift {
    a: Vec<f64>,
    b: Vec<f64>,
    gamma: f64,
    eta: f64,
}

impl StateCoefficient for TanhDrift {
    fn value(&self, i: usize, _t: f64, x: f64, y: &[f64], u: f64) -> f64 {
        let tm = th(mean(y));
        -self.a[i] * x + SELF_TANH * th(x) + self.gamma * tm + self.b[i] * u * (1.0 + self.eta * tm)
    }

    fn values(&self, _t: f64, y: &[f64], u: &[f64], out: &mut [f64]) {
        let tm = th(mean(y));
        for i in 0..y.len() {
            out[i] =
                -self.a[i] * y[i] + SELF_TANH * th(y[i]) + self.gamma * tm + self.b[i] * u[i] * (1.0 + self.eta * tm);
        }
    }

    fn first(&self, i: usize, t: f64, x: f64, y: &[f64], u: f64, out: &mut CoefFirst) {
        let m = mean(y);
        out.value = self.value(i, t, x, y, u);
        out.dx = -self.a[i] + SELF_TANH * sech2(x);
        out.du = self.b[i] * (1.0 + self.eta * th(m));
        out.dy
            .fill((self.gamma + self.b[i] * u * self.eta) * sech2(m) / y.len() as f64);
    }

    fn second(&self, i: usize, _t: f64, x: f64, y: &[f64], u: f64, out: &mut CoefSecond) {
        let n = y.len() as f64;
        let m = mean(y);
        out.clear();
        out.dxx = SELF_TANH * dsech2(x);
        out.duy.fill(self.b[i] * self.eta * sech2(m) / n);
        out.dyy
            .fill((self.gamma + self.b[i] * u * self.eta) * dsech2(m) / (n * n));
    }
}

#[derive(Debug, Clone, PartialEq)]
struct TanhDiffusion {
    s: Vec<f64>,
    c: f64,
    d: Vec<f64>,
    eta: f64,
}

impl StateCoefficient for TanhDiffusion {
    fn value(&self, i: usize, _t: f64, x: f64, y: &[f64], u: f64) -> f64 {
        self.s[i] + self.c * th(mean(y)) + self.d[i] * u + self.eta * u * th(x)
    }

    fn values(&self, _t: f64, y: &[f64], u: &[f64], out: &mut [f64]) {
        let ctm = self.c * th(mean(y));
        for i in 0..y.len() {
            let nl = if self.eta == 0.0 {
                0.0
            } else {
                self.eta * u[i] * th(y[i])
            };
            out[i] = self.s[i] + ctm + self.d[i] * u[i] + nl;
        }
    }

    fn first(&self, i: usize, t: f64, x: f64, y: &[f64], u: f64, out: &mut CoefFirst) {
        out.value = self.value(i, t, x, y, u);
        out.dx = self.eta * u * sech2(x);
        out.du = self.d[i] + self.eta * th(x);
        out.dy.fill(self.c * sech2(mean(y)) / y.len() as f64);
    }

    fn second(&self, _i: usize, _t: f64, x: f64, y: &[f64], u: f64, out: &mut CoefSecond) {
        let n = y.len() as f64;
        out.clear();
        out.dxx = self.eta * u * dsech2(x);
        out.dxu = self.eta * sech2(x);
        out.dyy.fill(self.c * dsech2(mean(y)) / (n * n));
    }
}

#[derive(Debug, Clone, PartialEq)]
struct TanhCost {
    q: Vec<f64>,
    r: Vec<f64>,
    rho: Vec<f64>,
    lambda: Vec<f64>,
    chi: f64,
    g: Vec<f64>,
    kappa: Vec<f64>,
}

#[inline]
fn v_entry(i: usize, k: usize, n: usize) -> f64 {
    f64::from(u8::from(i == k)) - 1.0 / n as f64
}

impl TanhCost {
    /// Cyclic neighbour coupled through `χ`, if any.
    fn partner(&self, i: usize, n: usize) -> Option<usize> {
        (n > 1 && self.chi != 0.0).then_some((i + 1) % n)
    }
}

impl RunningCost for TanhCost {
    fn value(&self, i: usize, _t: f64, y: &[f64], u: &[f64]) -> f64 {
        let n = y.len();
        let m = mean(y);
        let mut v = 0.5 * self.q[i] * (y[i] - m).powi(2)
            + 0.5 * self.r[i] * u[i] * u[i]
            + self.rho[i] * u[i] * th(m)
            + self.lambda[i] * log_cosh(y[i]);
        if let Some(p) = self.partner(i, n) {
            v += self.chi * u[i] * u[p];
        }
        v
    }

    fn values(&self, _t: f64, y: &[f64], u: &[f64], out: &mut [f64]) {
        let n = y.len();
        let m = mean(y);
        let tm = th(m);
        for i in 0..n {
            let mut v = 0.5 * self.q[i] * (y[i] - m).powi(2)
                + 0.5 * self.r[i] * u[i] * u[i]
                + self.rho[i] * u[i] * tm
                + self.lambda[i] * log_cosh(y[i]);
            if let Some(p) = self.partner(i, n) {
                v += self.chi * u[i] * u[p];
            }
            out[i] = v;
        }
    }

    fn first(&self, i: usize, t: f64, y: &[f64], u: &[f64], out: &mut CostFirst) {
        let n = y.len();
        let nf = n as f64;
        let m = mean(y);
        out.value = RunningCost::value(self, i, t, y, u);
        let dev = y[i] - m;
        for k in 0..n {
            out.dy[k] = self.q[i] * dev * v_entry(i, k, n) + self.rho[i] * u[i] * sech2(m) / nf;
        }
        out.dy[i] += self.lambda[i] * th(y[i]);
        out.du.fill(0.0);
        out.du[i] = self.r[i] * u[i] + self.rho[i] * th(m);
        if let Some(p) = self.partner(i, n) {
            out.du[i] += self.chi * u[p];
            out.du[p] += self.chi * u[i];
        }
    }

    fn second(&self, i: usize, _t: f64, y: &[f64], u: &[f64], out: &mut CostSecond) {
        let n = y.len();
        let nf = n as f64;
        let m = mean(y);
        out.clear();
        let curv = self.rho[i] * u[i] * dsech2(m) / (nf * nf);
        for k in 0..n {
            for l in 0..n {
                out.dyy[k * n + l] = self.q[i] * v_entry(i, k, n) * v_entry(i, l, n) + curv;
            }
            out.dyu[k * n + i] = self.rho[i] * sech2(m) / nf;
        }
        out.dyy[i * n + i] += self.lambda[i] * sech2(y[i]);
        out.duu[i * n + i] = self.r[i];
        if let Some(p) = self.partner(i, n) {
            out.duu[i * n + p] += self.chi;
            out.duu[p * n + i] += self.chi;
        }
    }
}

impl TerminalCost for TanhCost {
    fn value(&self, i: usize, y: &[f64]) -> f64 {
        let m = mean(y);
        0.5 * self.g[i] * (y[i] - m).powi(2) + self.kappa[i] * log_cosh(m)
    }

    fn values(&self, y: &[f64], out: &mut [f64]) {
        let m = mean(y);
        let lc = log_cosh(m);
        for (i, o) in out.iter_mut().enumerate() {
            *o = 0.5 * self.g[i] * (y[i] - m).powi(2) + self.kappa[i] * lc;
        }
    }

    fn first(&self, i: usize, y: &[f64], out: &mut [f64]) {
        let n = y.len();
        let m = mean(y);
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.g[i] * (y[i] - m) * v_entry(i, k, n) + self.kappa[i] * th(m) / n as f64;
        }
    }

    fn second(&self, i: usize, y: &[f64], out: &mut [f64]) {
        let n = y.len();
        let nf = n as f64;
        let curv = self.kappa[i] * sech2(mean(y)) / (nf * nf);
        for k in 0..n {
            for l in 0..n {
                out[k * n + l] = self.g[i] * v_entry(i, k, n) * v_entry(i, l, n) + curv;
            }
        }
    }
}

/// Parameters of the tanh-coupled preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TanhParams {
    pub a: PlayerParam,
    pub b: PlayerParam,
    pub gamma: f64,
    pub eta: f64,
    pub s: PlayerParam,
    pub c: f64,
    pub d: PlayerParam,
    pub eta_sigma: f64,
    pub q: PlayerParam,
    pub r: PlayerParam,
    pub rho: PlayerParam,
    pub lambda: PlayerParam,
    pub chi: f64,
    pub g: PlayerParam,
    pub kappa: PlayerParam,
    pub x0_mean: PlayerParam,
    pub x0_std: PlayerParam,
    /// Halton points used to sample the cost-gap norms.
    pub gap_samples: usize,
}

impl Default for TanhParams {
    fn default() -> Self {
        Self {
            a: PlayerParam::Spread { lo: 0.4, hi: 0.8 },
            b: 1.0.into(),
            gamma: 0.3,
            eta: 0.2,
            s: 0.3.into(),
            c: 0.1,
            d: 0.1.into(),
            eta_sigma: 0.05,
            q: PlayerParam::Spread { lo: 0.8, hi: 1.2 },
            r: 1.0.into(),
            rho: PlayerParam::Spread { lo: 0.0, hi: 0.2 },
            lambda: 0.1.into(),
            chi: 0.05,
            g: PlayerParam::Spread { lo: 0.8, hi: 1.2 },
            kappa: PlayerParam::Spread { lo: 0.0, hi: 0.2 },
            x0_mean: PlayerParam::Spread { lo: -0.5, hi: 0.5 },
            x0_std: 0.2.into(),
            gap_samples: 256,
        }
    }
}

/// Build the tanh game. Coupling constants hold on the validation box
/// (`|u| ≤ VALIDATION_U`), where the control-dependent terms are bounded.
pub fn build_tanh_game(p: &TanhParams, n: usize, horizon: f64) -> Result<(GameSpec, ConstantLedger)> {
    let r = |x: &PlayerParam, name: &str| x.resolve(n, name);
    let (a, b, s, d) = (r(&p.a, "a")?, r(&p.b, "b")?, r(&p.s, "s")?, r(&p.d, "d")?);
    let cost = TanhCost {
        q: r(&p.q, "q")?,
        r: r(&p.r, "r")?,
        rho: r(&p.rho, "rho")?,
        lambda: r(&p.lambda, "lambda")?,
        chi: p.chi,
        g: r(&p.g, "g")?,
        kappa: r(&p.kappa, "kappa")?,
    };
    require(&a, "a", "≥ 0", |x| x >= 0.0)?;
    require(&cost.r, "r", "> 0", |x| x > 0.0)?;
    require(
        &[p.gamma, p.eta, p.c, p.eta_sigma, p.chi],
        "scalar coupling",
        "finite",
        f64::is_finite,
    )?;
    let x0_std = r(&p.x0_std, "x0_std")?;
    require(&x0_std, "x0_std", "≥ 0", |x| x >= 0.0)?;
    if p.gap_samples == 0 {
        return Err(crate::Error::Config("gap_samples must be ≥ 1".into()));
    }
    let uu = VALIDATION_U;
    let (eta, es) = (p.eta.abs(), p.eta_sigma.abs());
    let bmax = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let l_b = (0..n).fold(0.0f64, |m, i| m.max(a[i] + SELF_TANH + b[i].abs() * (1.0 + eta)));
    let l_y_b = p.gamma.abs() + bmax * eta * uu.max(1.0);
    let l_s = (0..n).fold(0.0f64, |m, i| {
        m.max(s[i].abs())
            .max(es * uu + d[i].abs() + es)
            .max(es * (DSECH2_MAX * uu + 1.0))
    });
    let mut ledger = ConstantLedger::new(n, l_b, l_y_b, l_s, p.c.abs());
    let cost = Arc::new(cost);
    let spec = GameSpec {
        name: "tanh".into(),
        n_players: n,
        horizon,
        initial: InitialLaw::gaussian(r(&p.x0_mean, "x0_mean")?, x0_std),
        drift: Arc::new(TanhDrift {
            a,
            b,
            gamma: p.gamma,
            eta: p.eta,
        }),
        diffusion: Arc::new(TanhDiffusion {
            s,
            c: p.c,
            d,
            eta: p.eta_sigma,
        }),
        running: cost.clone(),
        terminal: cost,
        common_noise: false,
    };
    ledger.fill_gaps_sampled(&spec, &validation_box(horizon), p.gap_samples);
    Ok((spec, ledger))
}
