// SPDX-License-Identifier: MIT OR Apache-2.0

//! Constructive a priori bound for linear BSDEs.
//!
//! For `−dy = (A y + Σ_j B^j z^j + f) dt − Σ_j z^j dW^j`, `y_T = ξ`, with
//! coefficient norms bounded by `c1` and `d` drivers,
//!
//! ```text
//! E[ sup_t |y_t|² + Σ_j ∫ |z^j_t|² dt ] ≤ C · E[ |ξ|² + (∫ |f_t| dt)² ]
//!
//! κ  = 2 c1 + 2 c1² d
//! E  = exp(κ · max(1, T))
//! C3 = T κ E + 1,    D = C3 + E,    a = c1² (d + 1) + 1
//! C  = max( 8(aD + 1) + D + 8(aD + 1),  8(2a²D² + 1) + 8D(2a²D² + 1) )
//! ```
//!
//! `C ≥ 1` by construction, so constant solutions always satisfy the bound.

use crate::bsde::linear::{BsdeSolution, LinearBsde, MatrixLinearBsde};
use crate::error::{Error, Result};
use crate::sim::PathEnsemble;
use crate::stats::par_chunks;
use serde::{Deserialize, Serialize};

/// Closed-form constants of the a priori bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AprioriConstants {
    pub c1: f64,
    pub d: usize,
    pub horizon: f64,
    pub kappa: f64,
    pub exp_factor: f64,
    pub c3: f64,
    pub d_const: f64,
    pub a: f64,
    pub c: f64,
}

impl AprioriConstants {
    pub fn new(c1: f64, d: usize, horizon: f64) -> Result<Self> {
        if !(c1.is_finite() && c1 >= 0.0 && horizon > 0.0) {
            return Err(Error::InvalidParameters(format!(
                "a priori constants need c1 ≥ 0 and T > 0 (got c1 = {c1}, T = {horizon})"
            )));
        }
        let df = d as f64;
        let kappa = 2.0 * c1 + 2.0 * c1 * c1 * df;
        let exp_factor = (kappa * horizon.max(1.0)).exp();
        let c3 = horizon * kappa * exp_factor + 1.0;
        let d_const = c3 + exp_factor;
        let a = c1 * c1 * (df + 1.0) + 1.0;
        let ad = a * d_const;
        let first = 8.0 * (ad + 1.0) + d_const + 8.0 * (ad + 1.0);
        let q = 2.0 * ad * ad + 1.0;
        let second = 8.0 * q + 8.0 * d_const * q;
        Ok(Self {
            c1,
            d,
            horizon,
            kappa,
            exp_factor,
            c3,
            d_const,
            a,
            c: first.max(second),
        })
    }
}

/// Both sides of the a priori bound on one solved instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AprioriReport {
    pub constants: AprioriConstants,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

fn frob(m: &[f64]) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Largest Frobenius norm of `A` and every `B^j` over the ensemble nodes.
pub fn coefficient_bound(spec: &MatrixLinearBsde, ens: &PathEnsemble) -> f64 {
    let (m, d) = (spec.m, spec.d);
    let parts = par_chunks(ens.n_paths, |range| {
        let mut a = vec![0.0; m * m];
        let mut b = vec![0.0; d * m * m];
        let mut best = 0.0f64;
        for p in range {
            for k in 0..ens.grid.n_steps {
                let x = ens.x(p, k);
                (spec.a)(k, x, &mut a);
                (spec.b)(k, x, &mut b);
                best = best.max(frob(&a));
                for j in 0..d {
                    best = best.max(frob(&b[j * m * m..(j + 1) * m * m]));
                }
            }
        }
        best
    });
    parts.into_iter().fold(0.0, f64::max)
}

/// Evaluate both sides of the bound for a solved instance.
pub fn apriori_bound_check(spec: &MatrixLinearBsde, sol: &BsdeSolution, ens: &PathEnsemble) -> Result<AprioriReport> {
    let c1 = coefficient_bound(spec, ens);
    let constants = AprioriConstants::new(c1, spec.d, ens.grid.horizon)?;
    let m = sol.m;
    let dt = sol.dt;
    let parts = par_chunks(ens.n_paths, |range| {
        let mut feat = vec![0.0; sol.max_basis()];
        let mut yb = vec![0.0; m];
        let mut z = vec![0.0; sol.d * m];
        let mut y = vec![0.0; m];
        let mut f = vec![0.0; m];
        let mut work = spec.work();
        let (mut lhs, mut rhs) = (0.0, 0.0);
        for p in range {
            let mut sup = 0.0f64;
            let mut zint = 0.0;
            let mut fint = 0.0;
            for k in 0..=sol.n_steps {
                sol.y_at(spec, ens, k, p, &mut feat, &mut yb, &mut z, &mut work, &mut y);
                sup = sup.max(y.iter().map(|v| v * v).sum());
                if k < sol.n_steps {
                    zint += z.iter().map(|v| v * v).sum::<f64>() * dt;
                    (spec.f)(k, ens.x(p, k), &mut f);
                    fint += f.iter().map(|v| v * v).sum::<f64>().sqrt() * dt;
                }
            }
            let xi = &sol.terminal[p * m..(p + 1) * m];
            lhs += sup + zint;
            rhs += xi.iter().map(|v| v * v).sum::<f64>() + fint * fint;
        }
        (lhs, rhs)
    });
    let (lhs, rhs) = parts.into_iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = ens.n_paths as f64;
    let lhs = lhs / n;
    let rhs = constants.c * rhs / n;
    let ratio = if rhs > 0.0 {
        lhs / rhs
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(AprioriReport {
        constants,
        lhs,
        rhs,
        ratio,
    })
}
