// SPDX-License-Identifier: MIT OR Apache-2.0

//! Second linear derivatives `δ²V_i/δu_hδu_ℓ (u)(u'_h, u''_ℓ)`, `h ≠ ℓ`.
//!
//! ```text
//! FD:       D2(ε) = [V(+,+) − V(+,−) − V(−,+) + V(−,−)] / (4ε²),  Richardson over ε
//! Z-ORACLE: E[ Σ_k (Y_hᵀ ∂_xx f_i Y_ℓ + u' ∂_{u_h x} f_i·Y_ℓ + u'' Y_h·∂_{x u_ℓ} f_i
//!                  + ∂_{u_h u_ℓ} f_i u' u'' + ∂_x f_i·Z) dt
//!              + Y_hᵀ ∂_xx g_i Y_ℓ + ∂_x g_i·Z ]  (at T)
//! BSDE:     E[ Σ_k I_k dt ]  with the trace integrand
//!   I = u' ∂_u b_h (𝒫̄Y_ℓ)_h + u'' (Y_hᵀ𝒫̄)_ℓ ∂_u b_ℓ
//!     + u' ∂_u σ_h (𝒬^h Y_ℓ)_h + u'' ∂_u σ_ℓ (Y_hᵀ𝒬^ℓ)_ℓ
//!     + u' ∂_u σ_h 𝒫̄_hh π_h·Y_ℓ + u'' ∂_u σ_ℓ 𝒫̄_ℓℓ π_ℓ·Y_h
//!     + u' ∂_{u_h x} f_i·Y_ℓ + u'' Y_h·∂_{x u_ℓ} f_i + ∂_{u_h u_ℓ} f_i u' u''
//!     + P̄_h u' M^b_h(Y_ℓ) + P̄_ℓ u'' M^b_ℓ(Y_h) + Q^h_h u' M^σ_h(Y_ℓ) + Q^ℓ_ℓ u'' M^σ_ℓ(Y_h)
//!     + dt [D_hᵀ𝒫̄D_ℓ + Σ_j (D_hᵀ𝒬^j e_j E^j_ℓ + E^j_h e_jᵀ𝒬^j D_ℓ)]      (Euler consistency)
//! D = B0 Y + e_h ∂_u b_h u',   E^j = π_j·Y + δ_{jh} ∂_u σ_h u'
//! ```
//!
//! The BSDE route never forms `Z`: the second adjoint carries the state
//! Hessians and the first adjoint carries the control-state mixed partials.
//! The `dt`-weighted consistency term accounts for the products of drift
//! increments that the continuous-time formula drops; without it the BSDE and
//! Z routes differ by O(dt).

use crate::bsde::adjoint::{
    AdjointSolution, FirstAdjoint, FirstWork, SecondAdjoint, SecondAdjointSolution, SecondWork,
};
use crate::bsde::linear::LinearBsde;
use crate::derivatives::first::dot;
use crate::derivatives::{richardson, DerivativeEstimate, Method, EPS_SCHEDULE};
use crate::error::{Error, Result};
use crate::model::{ControlProfile, CostFirst, CostSecond, GameSpec, NoiseBundle, ScalarControl, TimeGrid};
use crate::sim::paths::cost_pass;
use crate::sim::sensitivity::{sensitivity_pass, PassVisitor, StepCtx};
use crate::sim::variational::{state_control_mixed, VariationalCoefficients};
use crate::sim::{DirSpec, PathEnsemble};
use crate::stats::Estimate;

fn check_pair(spec: &GameSpec, h: usize, l: usize) -> Result<()> {
    let n = spec.n_players;
    if h >= n || l >= n {
        return Err(Error::InvalidParameters(format!(
            "players ({h}, {l}) out of range (N = {n})"
        )));
    }
    if h == l {
        return Err(Error::InvalidParameters(
            "second derivatives are defined here for two distinct players (h ≠ ℓ)".into(),
        ));
    }
    Ok(())
}

/// CRN mixed differences of every player's cost.
#[allow(clippy::too_many_arguments)]
pub fn second_derivatives_fd(
    spec: &GameSpec,
    controls: &ControlProfile,
    h: usize,
    l: usize,
    dir_h: &ScalarControl,
    dir_l: &ScalarControl,
    grid: &TimeGrid,
    noise: &NoiseBundle,
) -> Result<Vec<DerivativeEstimate>> {
    check_pair(spec, h, l)?;
    let n = spec.n_players;
    let mut profiles = Vec::with_capacity(4 * EPS_SCHEDULE.len());
    for &e in &EPS_SCHEDULE {
        for (sh, sl) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            profiles.push(controls.perturbed(h, sh * e, dir_h).perturbed(l, sl * e, dir_l));
        }
    }
    let ne = EPS_SCHEDULE.len();
    let stride = ne + 1;
    let mom = cost_pass(spec, &profiles, grid, noise, n * stride, |c, out| {
        for i in 0..n {
            let mut d = [0.0; 3];
            for (s, &e) in EPS_SCHEDULE.iter().enumerate() {
                let v = |q: usize| c[(4 * s + q) * n + i];
                d[s] = (v(0) - v(1) - v(2) + v(3)) / (4.0 * e * e);
                out[i * stride + s] = d[s];
            }
            out[i * stride + ne] = richardson(d[1], d[2]);
        }
    })?;
    let est = mom.estimates();
    Ok((0..n)
        .map(|i| {
            let mut d = DerivativeEstimate::new(est[i * stride + ne], Method::Fd, i, vec![h, l]);
            d.eps = EPS_SCHEDULE.to_vec();
            d.raw = est[i * stride..i * stride + ne].to_vec();
            d
        })
        .collect())
}

/// CRN mixed difference of `V_i`.
#[allow(clippy::too_many_arguments)]
pub fn second_derivative_fd(
    spec: &GameSpec,
    controls: &ControlProfile,
    i: usize,
    h: usize,
    l: usize,
    dir_h: &ScalarControl,
    dir_l: &ScalarControl,
    grid: &TimeGrid,
    noise: &NoiseBundle,
) -> Result<DerivativeEstimate> {
    if i >= spec.n_players {
        return Err(Error::InvalidParameters(format!("player {i} out of range")));
    }
    Ok(second_derivatives_fd(spec, controls, h, l, dir_h, dir_l, grid, noise)?.swap_remove(i))
}

/// Cost Hessian quadratic form shared by the Z and SENS routes:
/// `Y_hᵀ H Y_ℓ + u' Σ_q H_{yu}[q][h] Y_ℓq + u'' Σ_q Y_hq H_{yu}[q][ℓ] + H_uu[h][ℓ] u' u''`.
#[allow(clippy::too_many_arguments)]
#[inline]
pub(crate) fn cost_quadratic(
    cs: &CostSecond,
    n: usize,
    h: usize,
    l: usize,
    a: f64,
    c: f64,
    yh: &[f64],
    yl: &[f64],
) -> f64 {
    let mut v = 0.0;
    for r in 0..n {
        if yh[r] != 0.0 {
            v += yh[r] * dot(&cs.dyy[r * n..(r + 1) * n], yl);
        }
        v += a * cs.dyu[r * n + h] * yl[r] + c * yh[r] * cs.dyu[r * n + l];
    }
    v + cs.duu[h * n + l] * a * c
}

struct ZVisitor<'a> {
    spec: &'a GameSpec,
    h: usize,
    l: usize,
}

impl PassVisitor for ZVisitor<'_> {
    type Scratch = (CostFirst, CostSecond, Vec<f64>, Vec<f64>);

    fn scratch(&self) -> Self::Scratch {
        let n = self.spec.n_players;
        (CostFirst::new(n), CostSecond::new(n), vec![0.0; n], vec![0.0; n * n])
    }

    fn visit(&self, ctx: &StepCtx<'_>, (cf, cs, gx, gxx): &mut Self::Scratch, out: &mut [f64]) {
        let n = ctx.n;
        let (yh, yl, z) = (ctx.y(0), ctx.y(1), ctx.z(0));
        for i in 0..n {
            if ctx.terminal {
                self.spec.terminal.first(i, ctx.x, gx);
                self.spec.terminal.second(i, ctx.x, gxx);
                let mut v = dot(gx, z);
                for r in 0..n {
                    v += yh[r] * dot(&gxx[r * n..(r + 1) * n], yl);
                }
                out[i] += v;
            } else {
                self.spec.running.first(i, ctx.t, ctx.x, ctx.u, cf);
                self.spec.running.second(i, ctx.t, ctx.x, ctx.u, cs);
                let v = cost_quadratic(cs, n, self.h, self.l, ctx.a[0], ctx.a[1], yh, yl) + dot(&cf.dy, z);
                out[i] += ctx.dt * v;
            }
        }
    }
}

/// Second derivatives of every player's cost through the second sensitivity `Z`.
pub fn second_derivative_z_oracle(
    spec: &GameSpec,
    ens: &PathEnsemble,
    noise: &NoiseBundle,
    dir_h: &DirSpec,
    dir_l: &DirSpec,
) -> Result<Vec<DerivativeEstimate>> {
    check_pair(spec, dir_h.player, dir_l.player)?;
    let n = spec.n_players;
    let dirs = [dir_h.clone(), dir_l.clone()];
    let v = ZVisitor {
        spec,
        h: dir_h.player,
        l: dir_l.player,
    };
    let out = sensitivity_pass(spec, ens, noise, &dirs, &[(0, 1)], n, &v, false)?;
    Ok(out
        .moments
        .estimates()
        .into_iter()
        .enumerate()
        .map(|(i, e)| DerivativeEstimate::new(e, Method::ZOracle, i, vec![dir_h.player, dir_l.player]))
        .collect())
}

/// Inputs of the BSDE trace integrand at one `(path, step)`.
pub struct ViInputs<'a> {
    pub n: usize,
    pub h: usize,
    pub l: usize,
    /// `u'_h(t_k)`, `u''_ℓ(t_k)`.
    pub a: f64,
    pub c: f64,
    pub yh: &'a [f64],
    pub yl: &'a [f64],
    pub var: &'a VariationalCoefficients,
    pub cost: &'a CostSecond,
    /// Second adjoint (N×N) and its `𝒬^j` blocks (`j·N² + r·N + c`).
    pub p2: &'a [f64],
    pub q2: &'a [f64],
    /// First adjoint of the same player and `Q^m_m` per `m`.
    pub p1: &'a [f64],
    pub q1: &'a [f64],
    pub dt: f64,
    pub euler_correction: bool,
}

/// The BSDE trace integrand `I_k` (see the module docs).
pub fn vi_integrand(v: &ViInputs<'_>, dh: &mut [f64], dl: &mut [f64]) -> f64 {
    let (n, h, l, a, c) = (v.n, v.h, v.l, v.a, v.c);
    let nn = n * n;
    let (yh, yl, var, p2, q2) = (v.yh, v.yl, v.var, v.p2, v.q2);
    let p2_yl_h = dot(&p2[h * n..(h + 1) * n], yl);
    let yh_p2_l: f64 = (0..n).map(|q| yh[q] * p2[q * n + l]).sum();
    let mut s = a * var.b1u[h] * p2_yl_h + c * yh_p2_l * var.b1u[l];
    let qh = &q2[h * nn..(h + 1) * nn];
    let ql = &q2[l * nn..(l + 1) * nn];
    s += a * var.pi1u[h] * dot(&qh[h * n..(h + 1) * n], yl);
    s += c * var.pi1u[l] * (0..n).map(|q| yh[q] * ql[q * n + l]).sum::<f64>();
    s += a * var.pi1u[h] * p2[h * n + h] * var.pi_dot(h, yl);
    s += c * var.pi1u[l] * p2[l * n + l] * var.pi_dot(l, yh);
    s += cost_quadratic(v.cost, n, h, l, a, c, yh, yl) - {
        // the state-state block is carried by the second adjoint
        let mut q = 0.0;
        for r in 0..n {
            if yh[r] != 0.0 {
                q += yh[r] * dot(&v.cost.dyy[r * n..(r + 1) * n], yl);
            }
        }
        q
    };
    s += v.p1[h] * a * state_control_mixed(h, &var.b2[h], yl) + v.p1[l] * c * state_control_mixed(l, &var.b2[l], yh);
    s += v.q1[h] * a * state_control_mixed(h, &var.s2[h], yl) + v.q1[l] * c * state_control_mixed(l, &var.s2[l], yh);
    if v.euler_correction {
        var.b0_mul(yh, dh);
        var.b0_mul(yl, dl);
        dh[h] += var.b1u[h] * a;
        dl[l] += var.b1u[l] * c;
        let mut corr = 0.0;
        for r in 0..n {
            if dh[r] != 0.0 {
                corr += dh[r] * dot(&p2[r * n..(r + 1) * n], dl);
            }
        }
        for j in 0..n {
            let eh = var.pi_dot(j, yh) + if j == h { var.pi1u[h] * a } else { 0.0 };
            let el = var.pi_dot(j, yl) + if j == l { var.pi1u[l] * c } else { 0.0 };
            let qj = &q2[j * nn..(j + 1) * nn];
            let col: f64 = (0..n).map(|r| dh[r] * qj[r * n + j]).sum();
            let row = dot(&qj[j * n..(j + 1) * n], dl);
            corr += col * el + eh * row;
        }
        s += v.dt * corr;
    }
    s
}

struct ViVisitor<'a> {
    spec: &'a GameSpec,
    ens: &'a PathEnsemble,
    first: &'a AdjointSolution,
    second: &'a SecondAdjointSolution,
    h: usize,
    l: usize,
    euler_correction: bool,
}

struct ViScratch {
    cs: CostSecond,
    f1: Vec<f64>,
    p1: Vec<f64>,
    q1: Vec<f64>,
    f2: Vec<f64>,
    p2: Vec<f64>,
    q2: Vec<f64>,
    // pathwise next-node values and their buffers
    f1n: Vec<f64>,
    p1b: Vec<f64>,
    q1b: Vec<f64>,
    p1n: Vec<f64>,
    f2n: Vec<f64>,
    p2b: Vec<f64>,
    q2b: Vec<f64>,
    p2n: Vec<f64>,
    w1: FirstWork,
    w2: SecondWork,
    // player-i slices and raw stand-ins
    p1i: Vec<f64>,
    q1i: Vec<f64>,
    p1raw: Vec<f64>,
    q1raw: Vec<f64>,
    q2raw: Vec<f64>,
    dh: Vec<f64>,
    dl: Vec<f64>,
}

impl PassVisitor for ViVisitor<'_> {
    type Scratch = ViScratch;

    fn scratch(&self) -> ViScratch {
        let n = self.spec.n_players;
        let (f1, p1, q1) = self.first.buffers();
        let (f1n, p1b, q1b) = self.first.buffers();
        let (f2, p2, q2) = self.second.buffers();
        let (f2n, p2b, q2b) = self.second.buffers();
        ViScratch {
            cs: CostSecond::new(n),
            f1,
            p1,
            q1,
            f2,
            p2,
            q2,
            f1n,
            p1b,
            q1b,
            p1n: vec![0.0; n * n],
            f2n,
            p2b,
            q2b,
            p2n: vec![0.0; n * n],
            w1: FirstAdjoint::new(self.spec).work(),
            w2: SecondAdjoint::new(self.spec, self.first, self.second.player).work(),
            p1i: vec![0.0; n],
            q1i: vec![0.0; n],
            p1raw: vec![0.0; n],
            q1raw: vec![0.0; n],
            q2raw: vec![0.0; n * n * n],
            dh: vec![0.0; n],
            dl: vec![0.0; n],
        }
    }

    fn needs_second(&self) -> bool {
        true
    }

    fn visit(&self, ctx: &StepCtx<'_>, s: &mut ViScratch, out: &mut [f64]) {
        if ctx.terminal {
            return;
        }
        let n = ctx.n;
        let nn = n * n;
        let (k, p, i) = (ctx.k, ctx.p, self.second.player);
        let (a, c) = (ctx.a[0], ctx.a[1]);
        self.first.eval(k, ctx.x, &mut s.f1, &mut s.p1, &mut s.q1);
        self.second.eval(k, ctx.x, &mut s.f2, &mut s.p2, &mut s.q2);
        let fa = FirstAdjoint::new(self.spec);
        self.first.bsde.y_at(
            &fa,
            self.ens,
            k + 1,
            p,
            &mut s.f1n,
            &mut s.p1b,
            &mut s.q1b,
            &mut s.w1,
            &mut s.p1n,
        );
        let sa = SecondAdjoint::new(self.spec, self.first, i);
        self.second.bsde.y_at(
            &sa,
            self.ens,
            k + 1,
            p,
            &mut s.f2n,
            &mut s.p2b,
            &mut s.q2b,
            &mut s.w2,
            &mut s.p2n,
        );
        self.spec.running.second(i, ctx.t, ctx.x, ctx.u, &mut s.cs);
        let dw = ctx.dw.unwrap();
        for m in 0..n {
            s.p1i[m] = s.p1[i * n + m];
            s.q1i[m] = self.first.q_diag(&s.q1, i, m);
            s.p1raw[m] = s.p1n[i * n + m];
            s.q1raw[m] = s.p1n[i * n + m] * dw[m] / ctx.dt;
        }
        for j in 0..n {
            let w = dw[j] / ctx.dt;
            for r in 0..nn {
                s.q2raw[j * nn + r] = s.p2n[r] * w;
            }
        }
        let mut inp = ViInputs {
            n,
            h: self.h,
            l: self.l,
            a,
            c,
            yh: ctx.y(0),
            yl: ctx.y(1),
            var: ctx.var,
            cost: &s.cs,
            p2: &s.p2,
            q2: &s.q2,
            p1: &s.p1i,
            q1: &s.q1i,
            dt: ctx.dt,
            euler_correction: self.euler_correction,
        };
        let reg = vi_integrand(&inp, &mut s.dh, &mut s.dl);
        inp.p2 = &s.p2n;
        inp.q2 = &s.q2raw;
        inp.p1 = &s.p1raw;
        inp.q1 = &s.q1raw;
        let raw = vi_integrand(&inp, &mut s.dh, &mut s.dl);
        out[0] += ctx.dt * reg;
        out[1] += ctx.dt * raw;
    }
}

/// Second derivative of the second adjoint's player through the trace
/// formula; `Z` is never formed.
#[allow(clippy::too_many_arguments)]
pub fn second_derivative_bsde(
    spec: &GameSpec,
    ens: &PathEnsemble,
    noise: &NoiseBundle,
    first: &AdjointSolution,
    second: &SecondAdjointSolution,
    dir_h: &DirSpec,
    dir_l: &DirSpec,
    euler_correction: bool,
) -> Result<DerivativeEstimate> {
    check_pair(spec, dir_h.player, dir_l.player)?;
    if first.bsde.n_steps != ens.grid.n_steps || second.bsde.n_steps != ens.grid.n_steps {
        return Err(Error::Mismatch("adjoints solved on another grid".into()));
    }
    let dirs = [dir_h.clone(), dir_l.clone()];
    let v = ViVisitor {
        spec,
        ens,
        first,
        second,
        h: dir_h.player,
        l: dir_l.player,
        euler_correction,
    };
    let out = sensitivity_pass(spec, ens, noise, &dirs, &[], 2, &v, false)?;
    let est = out.moments.estimates();
    Ok(DerivativeEstimate::new(
        Estimate::new(est[0].value, est[1].se),
        Method::Bsde,
        second.player,
        vec![dir_h.player, dir_l.player],
    ))
}
