// SPDX-License-Identifier: MIT OR Apache-2.0

//! Generic least-squares Monte Carlo solver for linear BSDEs.
//!
//! ```text
//! y_M   = ξ
//! ȳ_k   = Π_k[y_{k+1}],   z^j_k = Π_k[y_{k+1} ΔW^j_k] / dt
//! y_k   = ȳ_k + (A_k ȳ_k + Σ_j B^j_k z^j_k + f_k) dt
//! ```
//!
//! `Π_k` is the ridge projection onto the quadratic basis of `X_{t_k}`. The
//! solution stores regression coefficients per step rather than pathwise
//! values: `ȳ_k` and `z_k` are functions of `X_{t_k}` and can be evaluated on
//! demand, which keeps matrix-valued adjoints within memory at desk scale.

use crate::bsde::basis::{ridge_solve, FittedBasis, RegressionBasis};
use crate::error::{Error, Result};
use crate::model::NoiseBundle;
use crate::sim::PathEnsemble;
use crate::stats::par_chunks;
use serde::{Deserialize, Serialize};

/// A linear BSDE whose coefficients are adapted functions of the ensemble.
pub trait LinearBsde: Sync {
    /// Per-thread scratch space for driver evaluation.
    type Work: Send;
    fn work(&self) -> Self::Work;
    /// Dimension `m` of `y`.
    fn dim(&self) -> usize;
    /// Number of Brownian drivers `d`.
    fn n_drivers(&self) -> usize;
    /// Which entries of `z` (index `j·m + r`) the driver actually reads;
    /// `None` means all. Unread entries are not regressed and stay zero.
    fn z_mask(&self) -> Option<Vec<bool>> {
        None
    }
    /// Terminal value `ξ` on path `p`.
    fn terminal(&self, p: usize, ens: &PathEnsemble, out: &mut [f64]);
    /// Driver `A_k ȳ + Σ_j B^j_k z^j + f_k` on path `p`; `z` is `[driver][component]`.
    #[allow(clippy::too_many_arguments)]
    fn driver(
        &self,
        k: usize,
        p: usize,
        ens: &PathEnsemble,
        ybar: &[f64],
        z: &[f64],
        out: &mut [f64],
        work: &mut Self::Work,
    );
}

/// Per-step regression diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub step: usize,
    pub basis_size: usize,
    /// Mean squared residual `|y_{k+1} − ȳ_k|²`.
    pub residual: f64,
    pub condition: f64,
    pub ridge: f64,
    /// `max_a |mean((y_{k+1} − ȳ_k)·φ_a)|`, the normal-equation defect.
    pub orthogonality: f64,
}

/// Regression representation of a BSDE solution.
#[derive(Debug, Clone)]
pub struct BsdeSolution {
    pub m: usize,
    pub d: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub bases: Vec<FittedBasis>,
    /// `[step]` → K×m coefficients of `ȳ_k`.
    pub beta_ybar: Vec<Vec<f64>>,
    /// Regressed entries of `z` (indices `j·m + r`).
    pub z_cols: Vec<usize>,
    /// `[step]` → K×|z_cols| coefficients of the regressed `z_k` entries.
    pub beta_z: Vec<Vec<f64>>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// Terminal values `[path][component]`.
    pub terminal: Vec<f64>,
}

impl BsdeSolution {
    /// Largest basis size over all steps (feature buffer length).
    pub fn max_basis(&self) -> usize {
        self.bases.iter().map(|b| b.size).max().unwrap_or(1)
    }

    /// `ȳ_k(x)` and `z_k(x)`; `feat` must hold at least [`max_basis`](Self::max_basis) entries.
    #[inline]
    pub fn eval(&self, k: usize, x: &[f64], feat: &mut [f64], ybar: &mut [f64], z: &mut [f64]) {
        let fb = &self.bases[k];
        let kk = fb.size;
        fb.features(x, &mut feat[..kk]);
        let m = self.m;
        let nz = self.z_cols.len();
        ybar.fill(0.0);
        z.fill(0.0);
        let by = &self.beta_ybar[k];
        let bz = &self.beta_z[k];
        for a in 0..kk {
            let f = feat[a];
            let row = &by[a * m..(a + 1) * m];
            for (o, b) in ybar.iter_mut().zip(row) {
                *o += f * b;
            }
            let row = &bz[a * nz..(a + 1) * nz];
            for (c, b) in self.z_cols.iter().zip(row) {
                z[*c] += f * b;
            }
        }
    }

    /// Pathwise `y_k` (terminal value at `k = M`).
    #[allow(clippy::too_many_arguments)]
    pub fn y_at<S: LinearBsde>(
        &self,
        spec: &S,
        ens: &PathEnsemble,
        k: usize,
        p: usize,
        feat: &mut [f64],
        ybar: &mut [f64],
        z: &mut [f64],
        work: &mut S::Work,
        out: &mut [f64],
    ) {
        let m = self.m;
        if k == self.n_steps {
            out.copy_from_slice(&self.terminal[p * m..(p + 1) * m]);
            return;
        }
        self.eval(k, ens.x(p, k), feat, ybar, z);
        spec.driver(k, p, ens, ybar, z, out, work);
        for r in 0..m {
            out[r] = ybar[r] + self.dt * out[r];
        }
    }

    /// Pathwise `y` on every node `[path][node][m]` and `z` `[path][step][d][m]`.
    pub fn materialize<S: LinearBsde>(&self, spec: &S, ens: &PathEnsemble) -> (Vec<f64>, Vec<f64>) {
        let m = self.m;
        let dm = self.d * m;
        let nodes = self.n_steps + 1;
        let parts = par_chunks(ens.n_paths, |range| {
            let mut feat = vec![0.0; self.max_basis()];
            let mut yb = vec![0.0; m];
            let mut zz = vec![0.0; dm];
            let mut work = spec.work();
            let mut ys = Vec::with_capacity(range.len() * nodes * m);
            let mut zs = Vec::with_capacity(range.len() * self.n_steps * dm);
            let mut yk = vec![0.0; m];
            for p in range {
                for k in 0..nodes {
                    self.y_at(spec, ens, k, p, &mut feat, &mut yb, &mut zz, &mut work, &mut yk);
                    ys.extend_from_slice(&yk);
                    if k < self.n_steps {
                        zs.extend_from_slice(&zz);
                    }
                }
            }
            (ys, zs)
        });
        let mut y = Vec::new();
        let mut z = Vec::new();
        for (a, b) in parts {
            y.extend_from_slice(&a);
            z.extend_from_slice(&b);
        }
        (y, z)
    }
}

/// Backward induction by least-squares Monte Carlo.
pub fn solve_linear_bsde<S: LinearBsde>(
    spec: &S,
    ens: &PathEnsemble,
    noise: &NoiseBundle,
    basis: &RegressionBasis,
) -> Result<BsdeSolution> {
    ens.check_noise(noise)?;
    let m = spec.dim();
    let d = spec.n_drivers();
    if d > noise.n_drivers {
        return Err(Error::Mismatch(format!(
            "BSDE has {d} drivers but the noise bundle only {}",
            noise.n_drivers
        )));
    }
    let n_paths = ens.n_paths;
    let n_steps = ens.grid.n_steps;
    let dt = ens.grid.dt;
    let dim_x = ens.n_players;
    let z_cols: Vec<usize> = match spec.z_mask() {
        Some(mask) => {
            if mask.len() != d * m {
                return Err(Error::Mismatch(format!(
                    "z mask has {} entries, expected {}",
                    mask.len(),
                    d * m
                )));
            }
            (0..d * m).filter(|&c| mask[c]).collect()
        }
        None => (0..d * m).collect(),
    };
    let nz = z_cols.len();
    let q = m + nz;

    // terminal values
    let parts = par_chunks(n_paths, |range| {
        let mut v = vec![0.0; range.len() * m];
        for (r, p) in range.enumerate() {
            spec.terminal(p, ens, &mut v[r * m..(r + 1) * m]);
        }
        v
    });
    let terminal: Vec<f64> = parts.concat();
    if terminal.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "BSDE terminal condition".into(),
            player: 0,
            point: "T".into(),
        });
    }
    let mut y_next = terminal.clone();

    let mut bases = vec![None; n_steps];
    let mut beta_ybar = vec![Vec::new(); n_steps];
    let mut beta_z = vec![Vec::new(); n_steps];
    let mut diagnostics = Vec::with_capacity(n_steps);
    let inv_dt = 1.0 / dt;

    for k in (0..n_steps).rev() {
        let fb = FittedBasis::fit(basis.degree, dim_x, n_paths, |p| ens.x(p, k));
        let kk = fb.size;
        // normal equations
        let parts = par_chunks(n_paths, |range| {
            let mut g = vec![0.0; kk * kk];
            let mut r = vec![0.0; kk * q];
            let mut f = vec![0.0; kk];
            let mut tgt = vec![0.0; q];
            for p in range {
                fb.features(ens.x(p, k), &mut f);
                let yn = &y_next[p * m..(p + 1) * m];
                let dw = noise.dw(p, k);
                tgt[..m].copy_from_slice(yn);
                for (t, &c) in tgt[m..].iter_mut().zip(&z_cols) {
                    *t = yn[c % m] * dw[c / m] * inv_dt;
                }
                for a in 0..kk {
                    let fa = f[a];
                    for b in a..kk {
                        g[a * kk + b] += fa * f[b];
                    }
                    let row = &mut r[a * q..(a + 1) * q];
                    for (o, t) in row.iter_mut().zip(&tgt) {
                        *o += fa * t;
                    }
                }
            }
            (g, r)
        });
        let mut g = vec![0.0; kk * kk];
        let mut r = vec![0.0; kk * q];
        for (pg, pr) in &parts {
            for (a, b) in g.iter_mut().zip(pg) {
                *a += b;
            }
            for (a, b) in r.iter_mut().zip(pr) {
                *a += b;
            }
        }
        for a in 0..kk {
            for b in 0..a {
                g[a * kk + b] = g[b * kk + a];
            }
        }
        let sol = ridge_solve(&g, &r, kk, q, n_paths, basis, k)?;
        let mut by = vec![0.0; kk * m];
        let mut bz = vec![0.0; kk * nz];
        for a in 0..kk {
            by[a * m..(a + 1) * m].copy_from_slice(&sol.beta[a * q..a * q + m]);
            bz[a * nz..(a + 1) * nz].copy_from_slice(&sol.beta[a * q + m..(a + 1) * q]);
        }
        // pathwise update
        let parts = par_chunks(n_paths, |range| {
            let mut f = vec![0.0; kk];
            let mut yb = vec![0.0; m];
            let mut zz = vec![0.0; d * m];
            let mut drv = vec![0.0; m];
            let mut work = spec.work();
            let mut out = Vec::with_capacity(range.len() * m);
            let mut res = 0.0;
            let mut orth = vec![0.0; kk];
            let mut bad = false;
            for p in range {
                fb.features(ens.x(p, k), &mut f);
                yb.fill(0.0);
                zz.fill(0.0);
                for a in 0..kk {
                    let fa = f[a];
                    for c in 0..m {
                        yb[c] += fa * by[a * m + c];
                    }
                    for (c, b) in z_cols.iter().zip(&bz[a * nz..(a + 1) * nz]) {
                        zz[*c] += fa * b;
                    }
                }
                let yn = &y_next[p * m..(p + 1) * m];
                for c in 0..m {
                    let e = yn[c] - yb[c];
                    res += e * e;
                    for a in 0..kk {
                        orth[a] += e * f[a];
                    }
                }
                spec.driver(k, p, ens, &yb, &zz, &mut drv, &mut work);
                for c in 0..m {
                    let v = yb[c] + dt * drv[c];
                    bad |= !v.is_finite();
                    out.push(v);
                }
            }
            (out, res, orth, bad)
        });
        let mut y_new = Vec::with_capacity(n_paths * m);
        let mut res = 0.0;
        let mut orth = vec![0.0; kk];
        for (o, r, oo, bad) in parts {
            if bad {
                return Err(Error::NonFinite {
                    what: "BSDE backward step".into(),
                    player: 0,
                    point: format!("step {k}"),
                });
            }
            y_new.extend_from_slice(&o);
            res += r;
            for (a, b) in orth.iter_mut().zip(&oo) {
                *a += b;
            }
        }
        let scale = 1.0 / (n_paths * m) as f64;
        diagnostics.push(StepDiagnostics {
            step: k,
            basis_size: kk,
            residual: res * scale,
            condition: sol.condition,
            ridge: sol.ridge,
            orthogonality: orth.iter().map(|v| (v * scale).abs()).fold(0.0, f64::max),
        });
        y_next = y_new;
        bases[k] = Some(fb);
        beta_ybar[k] = by;
        beta_z[k] = bz;
    }
    diagnostics.reverse();
    Ok(BsdeSolution {
        m,
        d,
        n_steps,
        dt,
        bases: bases.into_iter().map(|b| b.unwrap()).collect(),
        beta_ybar,
        z_cols,
        beta_z,
        diagnostics,
        terminal,
    })
}

type MatFn = dyn Fn(usize, &[f64], &mut [f64]) + Send + Sync;
type TerminalFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Linear BSDE with explicit coefficient closures of `(step, X_{t_k})`:
/// `A` (m×m), `B^j` (m×m each, stacked), forcing `f` (m), terminal `ξ(X_T)`.
pub struct MatrixLinearBsde {
    pub m: usize,
    pub d: usize,
    pub a: Box<MatFn>,
    pub b: Box<MatFn>,
    pub f: Box<MatFn>,
    pub xi: Box<TerminalFn>,
}

/// Scratch for [`MatrixLinearBsde`].
pub struct MatrixWork {
    a: Vec<f64>,
    b: Vec<f64>,
    f: Vec<f64>,
}

impl MatrixLinearBsde {
    /// Coefficients at `(k, x)`: `(A, B stacked d×m×m, f)`.
    pub fn coefficients(&self, k: usize, x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut a = vec![0.0; self.m * self.m];
        let mut b = vec![0.0; self.d * self.m * self.m];
        let mut f = vec![0.0; self.m];
        (self.a)(k, x, &mut a);
        (self.b)(k, x, &mut b);
        (self.f)(k, x, &mut f);
        (a, b, f)
    }
}

impl LinearBsde for MatrixLinearBsde {
    type Work = MatrixWork;

    fn work(&self) -> MatrixWork {
        MatrixWork {
            a: vec![0.0; self.m * self.m],
            b: vec![0.0; self.d * self.m * self.m],
            f: vec![0.0; self.m],
        }
    }

    fn dim(&self) -> usize {
        self.m
    }

    fn n_drivers(&self) -> usize {
        self.d
    }

    fn terminal(&self, p: usize, ens: &PathEnsemble, out: &mut [f64]) {
        (self.xi)(ens.x(p, ens.grid.n_steps), out);
    }

    fn driver(
        &self,
        k: usize,
        p: usize,
        ens: &PathEnsemble,
        ybar: &[f64],
        z: &[f64],
        out: &mut [f64],
        w: &mut MatrixWork,
    ) {
        let m = self.m;
        let x = ens.x(p, k);
        (self.a)(k, x, &mut w.a);
        (self.b)(k, x, &mut w.b);
        (self.f)(k, x, &mut w.f);
        for r in 0..m {
            let mut v = w.f[r];
            for c in 0..m {
                v += w.a[r * m + c] * ybar[c];
            }
            for j in 0..self.d {
                let bj = &w.b[j * m * m..(j + 1) * m * m];
                for c in 0..m {
                    v += bj[r * m + c] * z[j * m + c];
                }
            }
            out[r] = v;
        }
    }
}
