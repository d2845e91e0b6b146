// SPDX-License-Identifier: MIT OR Apache-2.0

//! Itô trace duality between two matrix-valued processes.
//!
//! For `d𝒫 = Θ dt + Σ_j 𝐐^j dW^j` and `d𝒴 = Φ dt + Σ_j Ψ^j dW^j`,
//!
//! ```text
//! E tr[𝒫_T 𝒴_T] − E tr[𝒫_0 𝒴_0] = ∫ E tr[Θ 𝒴 + 𝒫 Φ + Σ_j 𝐐^j Ψ^j] dt
//! ```
//!
//! The residual of this identity is estimated pathwise with left-endpoint
//! quadrature. It vanishes for exact processes up to O(dt) discretization and
//! Monte Carlo error, which makes it a joint check of a second adjoint and a
//! forward sensitivity outer product living on the same ensemble.

use crate::bsde::adjoint::{AdjointSolution, SecondAdjoint, SecondAdjointSolution, SecondWork};
use crate::bsde::linear::LinearBsde;
use crate::error::{Error, Result};
use crate::model::{GameSpec, ScalarControl};
use crate::sim::{PathEnsemble, SensitivityEnsemble, VariationalCoefficients};
use crate::stats::{par_chunks, Estimate, MomentVec};
use serde::{Deserialize, Serialize};

/// A square matrix process with its Itô drift and diffusion recorded at every node.
pub trait MatrixProcess: Sync {
    type Work: Send;
    fn work(&self) -> Self::Work;
    /// Matrix dimension `n` (values are row-major n×n).
    fn dim(&self) -> usize;
    /// Number of Brownian drivers.
    fn n_drivers(&self) -> usize;
    /// Value at node `k` of path `p`; at `k < M` also the drift and the
    /// diffusion components (`[driver][n×n]`).
    fn at(
        &self,
        p: usize,
        k: usize,
        value: &mut [f64],
        drift: &mut [f64],
        diffusion: &mut [f64],
        work: &mut Self::Work,
    );
}

/// Outcome of a trace-duality check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDualityReport {
    /// `E tr[𝒫_T𝒴_T] − E tr[𝒫_0𝒴_0]`.
    pub lhs: Estimate,
    /// Quadrature of the right-hand side.
    pub rhs: Estimate,
    /// `|lhs − rhs|` with the SE of the pathwise difference.
    pub residual: f64,
    pub se: f64,
}

fn tr_prod(a: &[f64], b: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for r in 0..n {
        for c in 0..n {
            s += a[r * n + c] * b[c * n + r];
        }
    }
    s
}

/// Residual of the trace-duality identity for `(𝒫, 𝒴)` on `n_paths` paths
/// of an `n_steps` grid with step `dt`.
pub fn trace_duality_residual<A: MatrixProcess, B: MatrixProcess>(
    p_like: &A,
    y_like: &B,
    n_paths: usize,
    n_steps: usize,
    dt: f64,
) -> Result<TraceDualityReport> {
    let n = p_like.dim();
    if y_like.dim() != n || y_like.n_drivers() != p_like.n_drivers() {
        return Err(Error::Mismatch(format!(
            "matrix processes of shape {}×{} / {} drivers and {}×{} / {} drivers",
            n,
            n,
            p_like.n_drivers(),
            y_like.dim(),
            y_like.dim(),
            y_like.n_drivers()
        )));
    }
    let nd = p_like.n_drivers();
    let nn = n * n;
    let parts = par_chunks(n_paths, |range| {
        let mut wa = p_like.work();
        let mut wb = y_like.work();
        let (mut pv, mut pd, mut pq) = (vec![0.0; nn], vec![0.0; nn], vec![0.0; nd * nn]);
        let (mut yv, mut yd, mut yq) = (vec![0.0; nn], vec![0.0; nn], vec![0.0; nd * nn]);
        let mut acc = MomentVec::zeros(3);
        for p in range {
            let mut rhs = 0.0;
            let mut start = 0.0;
            for k in 0..=n_steps {
                p_like.at(p, k, &mut pv, &mut pd, &mut pq, &mut wa);
                y_like.at(p, k, &mut yv, &mut yd, &mut yq, &mut wb);
                if k == 0 {
                    start = tr_prod(&pv, &yv, n);
                }
                if k == n_steps {
                    let lhs = tr_prod(&pv, &yv, n) - start;
                    acc.push_row(&[lhs, rhs, lhs - rhs]);
                    break;
                }
                let mut v = tr_prod(&pd, &yv, n) + tr_prod(&pv, &yd, n);
                for j in 0..nd {
                    v += tr_prod(&pq[j * nn..(j + 1) * nn], &yq[j * nn..(j + 1) * nn], n);
                }
                rhs += v * dt;
            }
        }
        acc
    });
    let est = MomentVec::fold(parts, 3).estimates();
    Ok(TraceDualityReport {
        lhs: est[0],
        rhs: est[1],
        residual: est[2].value.abs(),
        se: est[2].se,
    })
}

/// Deterministic matrix process given by closures of time.
pub struct DeterministicMatrix<F, G> {
    pub n: usize,
    pub n_drivers: usize,
    pub times: Vec<f64>,
    pub value: F,
    pub drift: G,
}

impl<F, G> MatrixProcess for DeterministicMatrix<F, G>
where
    F: Fn(f64, &mut [f64]) + Sync,
    G: Fn(f64, &mut [f64]) + Sync,
{
    type Work = ();
    fn work(&self) {}
    fn dim(&self) -> usize {
        self.n
    }
    fn n_drivers(&self) -> usize {
        self.n_drivers
    }
    fn at(&self, _: usize, k: usize, value: &mut [f64], drift: &mut [f64], diffusion: &mut [f64], _: &mut ()) {
        let t = self.times[k];
        (self.value)(t, value);
        (self.drift)(t, drift);
        diffusion.fill(0.0);
    }
}

/// Second adjoint `𝒫` of one player as a matrix process:
/// value `𝒫_k`, drift `−F_k`, diffusion `𝒬^j_k`.
pub struct SecondAdjointProcess<'a> {
    pub spec: &'a GameSpec,
    pub ens: &'a PathEnsemble,
    pub first: &'a AdjointSolution,
    pub second: &'a SecondAdjointSolution,
}

/// Scratch for [`SecondAdjointProcess`].
pub struct SecondAdjointProcessWork {
    inner: SecondWork,
    feat: Vec<f64>,
    pbar: Vec<f64>,
}

impl MatrixProcess for SecondAdjointProcess<'_> {
    type Work = SecondAdjointProcessWork;

    fn work(&self) -> Self::Work {
        let (feat, pbar, _) = self.second.buffers();
        SecondAdjointProcessWork {
            inner: SecondAdjoint::new(self.spec, self.first, self.second.player).work(),
            feat,
            pbar,
        }
    }

    fn dim(&self) -> usize {
        self.spec.n_players
    }

    fn n_drivers(&self) -> usize {
        self.spec.n_players
    }

    fn at(&self, p: usize, k: usize, value: &mut [f64], drift: &mut [f64], diffusion: &mut [f64], w: &mut Self::Work) {
        let sol = &self.second.bsde;
        let m = sol.m;
        if k == sol.n_steps {
            value.copy_from_slice(&sol.terminal[p * m..(p + 1) * m]);
            drift.fill(0.0);
            diffusion.fill(0.0);
            return;
        }
        let adj = SecondAdjoint::new(self.spec, self.first, self.second.player);
        self.second
            .eval(k, self.ens.x(p, k), &mut w.feat, &mut w.pbar, diffusion);
        adj.driver(k, p, self.ens, &w.pbar, diffusion, drift, &mut w.inner);
        for r in 0..m {
            value[r] = w.pbar[r] + sol.dt * drift[r];
            drift[r] = -drift[r];
        }
    }
}

/// Outer product `𝒴 = Y^ℓ (Y^h)ᵀ` of two stored tangent processes.
pub struct OuterProductProcess<'a> {
    pub spec: &'a GameSpec,
    pub ens: &'a PathEnsemble,
    pub y_l: &'a SensitivityEnsemble,
    pub y_h: &'a SensitivityEnsemble,
    dir_l: Vec<f64>,
    dir_h: Vec<f64>,
}

impl<'a> OuterProductProcess<'a> {
    pub fn new(
        spec: &'a GameSpec,
        ens: &'a PathEnsemble,
        y_l: &'a SensitivityEnsemble,
        y_h: &'a SensitivityEnsemble,
    ) -> Result<Self> {
        for y in [y_l, y_h] {
            if y.seed != ens.seed || y.n_steps != ens.grid.n_steps || y.n_players != spec.n_players {
                return Err(Error::Mismatch("sensitivity ensemble built on another ensemble".into()));
            }
        }
        let tab = |c: &ScalarControl| c.tabulate(&ens.grid);
        Ok(Self {
            spec,
            ens,
            y_l,
            y_h,
            dir_l: tab(&y_l.direction),
            dir_h: tab(&y_h.direction),
        })
    }
}

/// Scratch for [`OuterProductProcess`].
pub struct OuterWork {
    var: VariationalCoefficients,
    dl: Vec<f64>,
    dh: Vec<f64>,
    sl: Vec<f64>,
    sh: Vec<f64>,
}

impl MatrixProcess for OuterProductProcess<'_> {
    type Work = OuterWork;

    fn work(&self) -> OuterWork {
        let n = self.spec.n_players;
        OuterWork {
            var: VariationalCoefficients::new(n),
            dl: vec![0.0; n],
            dh: vec![0.0; n],
            sl: vec![0.0; n],
            sh: vec![0.0; n],
        }
    }

    fn dim(&self) -> usize {
        self.spec.n_players
    }

    fn n_drivers(&self) -> usize {
        self.spec.n_players
    }

    fn at(&self, p: usize, k: usize, value: &mut [f64], drift: &mut [f64], diffusion: &mut [f64], w: &mut OuterWork) {
        let n = self.spec.n_players;
        let yl = self.y_l.y(p, k);
        let yh = self.y_h.y(p, k);
        for r in 0..n {
            for c in 0..n {
                value[r * n + c] = yl[r] * yh[c];
            }
        }
        if k == self.ens.grid.n_steps {
            drift.fill(0.0);
            diffusion.fill(0.0);
            return;
        }
        let t = self.ens.grid.t(k);
        w.var.fill(self.spec, t, self.ens.x(p, k), self.ens.u(p, k), false);
        let (l, h) = (self.y_l.perturbed_player, self.y_h.perturbed_player);
        w.var.b0_mul(yl, &mut w.dl);
        w.var.b0_mul(yh, &mut w.dh);
        w.dl[l] += w.var.b1u[l] * self.dir_l[k];
        w.dh[h] += w.var.b1u[h] * self.dir_h[k];
        for j in 0..n {
            w.sl[j] = w.var.pi_dot(j, yl) + if j == l { w.var.pi1u[l] * self.dir_l[k] } else { 0.0 };
            w.sh[j] = w.var.pi_dot(j, yh) + if j == h { w.var.pi1u[h] * self.dir_h[k] } else { 0.0 };
        }
        for r in 0..n {
            for c in 0..n {
                drift[r * n + c] = w.dl[r] * yh[c] + yl[r] * w.dh[c];
            }
            drift[r * n + r] += w.sl[r] * w.sh[r];
        }
        diffusion.fill(0.0);
        let nn = n * n;
        for j in 0..n {
            let dj = &mut diffusion[j * nn..(j + 1) * nn];
            for c in 0..n {
                dj[j * n + c] += w.sl[j] * yh[c];
                dj[c * n + j] += yl[c] * w.sh[j];
            }
        }
    }
}
