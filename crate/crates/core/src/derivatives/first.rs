// SPDX-License-Identifier: MIT OR Apache-2.0

//! First linear derivatives `δV_i/δu_h (u)(u'_h)`.
//!
//! ```text
//! FD:    D(ε) = [V_i(u + ε u'_h) − V_i(u − ε u'_h)] / (2ε),   R = (4 D(ε/2) − D(ε)) / 3
//! SENS:  E[ Σ_k (Y_k·∂_x f_i + ∂_{u_h} f_i u'_k) dt + ∂_x g_i(X_M)·Y_M ]
//! BSDE:  E[ Σ_k (P̄_{k,h} ∂_u b_h + ∂_u σ_h Q^h_{k,h} + ∂_{u_h} f_i) u'_k dt ]
//! ```
//!
//! The BSDE value uses the regressed `(P̄, Q)`; its standard error is taken
//! from the pathwise version with `P_{k+1}` and `P_{k+1} ΔW^h_k / dt` in place
//! of the conditional expectations, whose mean targets the same quantity.

use crate::bsde::adjoint::{AdjointSolution, FirstAdjoint, FirstWork};
use crate::bsde::linear::LinearBsde;
use crate::derivatives::{richardson, DerivativeEstimate, Method, EPS_SCHEDULE};
use crate::error::{Error, Result};
use crate::model::{ControlProfile, CostFirst, GameSpec, NoiseBundle, ScalarControl, TimeGrid};
use crate::sim::paths::cost_pass;
use crate::sim::sensitivity::{sensitivity_pass, PassVisitor, StepCtx};
use crate::sim::{DirSpec, PathEnsemble, SensitivityEnsemble};
use crate::stats::{par_chunks, Estimate, MomentVec};

fn check_player(spec: &GameSpec, i: usize) -> Result<()> {
    if i >= spec.n_players {
        return Err(Error::InvalidParameters(format!(
            "player {i} out of range (N = {})",
            spec.n_players
        )));
    }
    Ok(())
}

/// CRN finite differences of every player's cost along `u'_h`.
pub fn first_derivatives_fd(
    spec: &GameSpec,
    controls: &ControlProfile,
    h: usize,
    direction: &ScalarControl,
    grid: &TimeGrid,
    noise: &NoiseBundle,
) -> Result<Vec<DerivativeEstimate>> {
    check_player(spec, h)?;
    let n = spec.n_players;
    let mut profiles = Vec::with_capacity(2 * EPS_SCHEDULE.len());
    for &e in &EPS_SCHEDULE {
        profiles.push(controls.perturbed(h, e, direction));
        profiles.push(controls.perturbed(h, -e, direction));
    }
    let ne = EPS_SCHEDULE.len();
    // channels per player: D(ε_0), D(ε_1), D(ε_2), Richardson
    let stride = ne + 1;
    let mom = cost_pass(spec, &profiles, grid, noise, n * stride, |c, out| {
        for i in 0..n {
            let mut d = [0.0; 3];
            for (s, &e) in EPS_SCHEDULE.iter().enumerate() {
                d[s] = (c[(2 * s) * n + i] - c[(2 * s + 1) * n + i]) / (2.0 * e);
                out[i * stride + s] = d[s];
            }
            out[i * stride + ne] = richardson(d[1], d[2]);
        }
    })?;
    let est = mom.estimates();
    Ok((0..n)
        .map(|i| {
            let mut d = DerivativeEstimate::new(est[i * stride + ne], Method::Fd, i, vec![h]);
            d.eps = EPS_SCHEDULE.to_vec();
            d.raw = est[i * stride..i * stride + ne].to_vec();
            d
        })
        .collect())
}

/// CRN finite difference of `V_i` along `u'_h`.
pub fn first_derivative_fd(
    spec: &GameSpec,
    controls: &ControlProfile,
    i: usize,
    h: usize,
    direction: &ScalarControl,
    grid: &TimeGrid,
    noise: &NoiseBundle,
) -> Result<DerivativeEstimate> {
    check_player(spec, i)?;
    Ok(first_derivatives_fd(spec, controls, h, direction, grid, noise)?.swap_remove(i))
}

/// Sensitivity formula of `V_i` from a stored tangent process.
pub fn first_derivative_sens(
    spec: &GameSpec,
    ens: &PathEnsemble,
    y: &SensitivityEnsemble,
    i: usize,
) -> Result<DerivativeEstimate> {
    check_player(spec, i)?;
    if y.seed != ens.seed || y.n_steps != ens.grid.n_steps || y.n_players != spec.n_players {
        return Err(Error::Mismatch("tangent process built on another ensemble".into()));
    }
    let n = spec.n_players;
    let h = y.perturbed_player;
    let grid = ens.grid;
    let dir = y.direction.tabulate(&grid);
    let parts = par_chunks(ens.n_paths, |range| {
        let mut cf = CostFirst::new(n);
        let mut gx = vec![0.0; n];
        let mut acc = MomentVec::zeros(1);
        for p in range {
            let mut v = 0.0;
            for k in 0..grid.n_steps {
                spec.running.first(i, grid.t(k), ens.x(p, k), ens.u(p, k), &mut cf);
                v += grid.dt * (dot(&cf.dy, y.y(p, k)) + cf.du[h] * dir[k]);
            }
            spec.terminal.first(i, ens.x(p, grid.n_steps), &mut gx);
            v += dot(&gx, y.y(p, grid.n_steps));
            acc.push_row(&[v]);
        }
        acc
    });
    let est = MomentVec::fold(parts, 1).estimates()[0];
    Ok(DerivativeEstimate::new(est, Method::Sens, i, vec![h]))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct SensVisitor<'a> {
    spec: &'a GameSpec,
    dirs: &'a [DirSpec],
}

impl PassVisitor for SensVisitor<'_> {
    type Scratch = (CostFirst, Vec<f64>);

    fn scratch(&self) -> Self::Scratch {
        let n = self.spec.n_players;
        (CostFirst::new(n), vec![0.0; n])
    }

    fn visit(&self, ctx: &StepCtx<'_>, (cf, gx): &mut Self::Scratch, out: &mut [f64]) {
        let n = ctx.n;
        for i in 0..n {
            if ctx.terminal {
                self.spec.terminal.first(i, ctx.x, gx);
                for d in 0..self.dirs.len() {
                    out[d * n + i] += dot(gx, ctx.y(d));
                }
            } else {
                self.spec.running.first(i, ctx.t, ctx.x, ctx.u, cf);
                for (d, ds) in self.dirs.iter().enumerate() {
                    out[d * n + i] += ctx.dt * (dot(&cf.dy, ctx.y(d)) + cf.du[ds.player] * ctx.a[d]);
                }
            }
        }
    }
}

/// Sensitivity formula for every player and every direction in one streamed
/// pass; result `[dir][player]`.
pub fn first_derivatives_sens(
    spec: &GameSpec,
    ens: &PathEnsemble,
    noise: &NoiseBundle,
    dirs: &[DirSpec],
) -> Result<Vec<Vec<DerivativeEstimate>>> {
    let n = spec.n_players;
    let out = sensitivity_pass(
        spec,
        ens,
        noise,
        dirs,
        &[],
        dirs.len() * n,
        &SensVisitor { spec, dirs },
        false,
    )?;
    let est = out.moments.estimates();
    Ok(dirs
        .iter()
        .enumerate()
        .map(|(d, ds)| {
            (0..n)
                .map(|i| DerivativeEstimate::new(est[d * n + i], Method::Sens, i, vec![ds.player]))
                .collect()
        })
        .collect())
}

struct BsdeVisitor<'a> {
    spec: &'a GameSpec,
    ens: &'a PathEnsemble,
    adj: &'a AdjointSolution,
    dirs: &'a [DirSpec],
}

struct BsdeScratch {
    cf: CostFirst,
    feat: Vec<f64>,
    pbar: Vec<f64>,
    q: Vec<f64>,
    pnext: Vec<f64>,
    fb: Vec<f64>,
    pb: Vec<f64>,
    qb: Vec<f64>,
    work: FirstWork,
}

impl PassVisitor for BsdeVisitor<'_> {
    type Scratch = BsdeScratch;

    fn scratch(&self) -> BsdeScratch {
        let n = self.spec.n_players;
        let (feat, pbar, q) = self.adj.buffers();
        let (fb, pb, qb) = self.adj.buffers();
        BsdeScratch {
            cf: CostFirst::new(n),
            feat,
            pbar,
            q,
            pnext: vec![0.0; n * n],
            fb,
            pb,
            qb,
            work: FirstAdjoint::new(self.spec).work(),
        }
    }

    fn visit(&self, ctx: &StepCtx<'_>, s: &mut BsdeScratch, out: &mut [f64]) {
        if ctx.terminal {
            return;
        }
        let n = ctx.n;
        let k = ctx.k;
        self.adj.eval(k, ctx.x, &mut s.feat, &mut s.pbar, &mut s.q);
        let adj = FirstAdjoint::new(self.spec);
        self.adj.bsde.y_at(
            &adj,
            self.ens,
            k + 1,
            ctx.p,
            &mut s.fb,
            &mut s.pb,
            &mut s.qb,
            &mut s.work,
            &mut s.pnext,
        );
        let dw = ctx.dw.unwrap();
        let var = ctx.var;
        for i in 0..n {
            self.spec.running.first(i, ctx.t, ctx.x, ctx.u, &mut s.cf);
            for (d, ds) in self.dirs.iter().enumerate() {
                let h = ds.player;
                let a = ctx.a[d];
                if a == 0.0 {
                    continue;
                }
                let reg = s.pbar[i * n + h] * var.b1u[h] + var.pi1u[h] * self.adj.q_diag(&s.q, i, h) + s.cf.du[h];
                let pn = s.pnext[i * n + h];
                let raw = pn * var.b1u[h] + var.pi1u[h] * pn * dw[h] / ctx.dt + s.cf.du[h];
                out[(d * n + i) * 2] += ctx.dt * a * reg;
                out[(d * n + i) * 2 + 1] += ctx.dt * a * raw;
            }
        }
    }
}

/// Adjoint (duality) formula for every player and direction; result `[dir][player]`.
pub fn first_derivatives_bsde(
    spec: &GameSpec,
    ens: &PathEnsemble,
    noise: &NoiseBundle,
    adj: &AdjointSolution,
    dirs: &[DirSpec],
) -> Result<Vec<Vec<DerivativeEstimate>>> {
    let n = spec.n_players;
    if adj.n_players != n || adj.bsde.n_steps != ens.grid.n_steps {
        return Err(Error::Mismatch("adjoint solved on another game or grid".into()));
    }
    let visitor = BsdeVisitor { spec, ens, adj, dirs };
    // directions are only read through the visitor, so no tangent processes are propagated
    let lite: Vec<DirSpec> = Vec::new();
    let tabs: Vec<Vec<f64>> = dirs.iter().map(|d| d.control.tabulate(&ens.grid)).collect();
    let wrapped = WithDirs {
        inner: &visitor,
        tabs: &tabs,
    };
    let out = sensitivity_pass(spec, ens, noise, &lite, &[], dirs.len() * n * 2, &wrapped, false)?;
    let est = out.moments.estimates();
    Ok(dirs
        .iter()
        .enumerate()
        .map(|(d, ds)| {
            (0..n)
                .map(|i| {
                    let e = Estimate::new(est[(d * n + i) * 2].value, est[(d * n + i) * 2 + 1].se);
                    DerivativeEstimate::new(e, Method::Bsde, i, vec![ds.player])
                })
                .collect()
        })
        .collect())
}

/// Supplies direction values to a visitor without propagating tangents.
struct WithDirs<'a, V: PassVisitor> {
    inner: &'a V,
    tabs: &'a [Vec<f64>],
}

impl<V: PassVisitor> PassVisitor for WithDirs<'_, V> {
    type Scratch = (V::Scratch, Vec<f64>);

    fn scratch(&self) -> Self::Scratch {
        (self.inner.scratch(), vec![0.0; self.tabs.len()])
    }

    fn visit(&self, ctx: &StepCtx<'_>, (s, a): &mut Self::Scratch, out: &mut [f64]) {
        for (d, t) in self.tabs.iter().enumerate() {
            a[d] = t[ctx.k];
        }
        let c = StepCtx {
            p: ctx.p,
            k: ctx.k,
            t: ctx.t,
            dt: ctx.dt,
            terminal: ctx.terminal,
            x: ctx.x,
            u: ctx.u,
            x_next: ctx.x_next,
            dw: ctx.dw,
            var: ctx.var,
            ys: ctx.ys,
            zs: ctx.zs,
            a,
            n: ctx.n,
        };
        self.inner.visit(&c, s, out);
    }

    fn needs_second(&self) -> bool {
        self.inner.needs_second()
    }
}

/// Adjoint formula of `V_i` along `u'_h`.
pub fn first_derivative_bsde(
    spec: &GameSpec,
    ens: &PathEnsemble,
    noise: &NoiseBundle,
    adj: &AdjointSolution,
    i: usize,
    h: usize,
    direction: &ScalarControl,
) -> Result<DerivativeEstimate> {
    check_player(spec, i)?;
    check_player(spec, h)?;
    let dirs = [DirSpec::new(h, direction.clone())];
    Ok(first_derivatives_bsde(spec, ens, noise, adj, &dirs)?
        .remove(0)
        .swap_remove(i))
}
