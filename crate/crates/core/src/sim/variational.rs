// SPDX-License-Identifier: MIT OR Apache-2.0

//! Coefficient matrices of the linearized (variational) system.
//!
//! With `X_m` entering `φ_m` both as the private argument and through `y`,
//!
//! ```text
//! B0[m][q]   = δ_{mq} ∂_x b_m + ∂_{y_q} b_m        (N×N)
//! Π0^j       = e_j π_jᵀ,  π_j[q] = δ_{jq} ∂_x σ_j + ∂_{y_q} σ_j
//! B1u^h      = e_h ∂_u b_h,   Π1u^j = e_j ∂_u σ_j
//! ```
//!
//! Only the row `π_j` of each `Π0^j` is stored. Second partials of every
//! coefficient are kept for the second-order sources; the state Hessian of
//! `φ_m` is
//!
//! ```text
//! H^φ_m[p][q] = δ_{pm}δ_{qm} ∂_xx φ_m + δ_{pm} ∂_{x y_q} φ_m + δ_{qm} ∂_{x y_p} φ_m + ∂_{y_p y_q} φ_m
//! ```

use crate::model::{CoefFirst, CoefSecond, GameSpec};

/// Variational coefficients at one `(path, step)`.
#[derive(Debug, Clone)]
pub struct VariationalCoefficients {
    pub n: usize,
    /// Row-major N×N.
    pub b0: Vec<f64>,
    /// Row `j` holds `π_j`, the only nonzero row of `Π0^j`.
    pub pi0: Vec<f64>,
    /// `∂_u b_h` per player.
    pub b1u: Vec<f64>,
    /// `∂_u σ_j` per player.
    pub pi1u: Vec<f64>,
    /// Drift second partials per player (filled when requested).
    pub b2: Vec<CoefSecond>,
    /// Diffusion second partials per player (filled when requested).
    pub s2: Vec<CoefSecond>,
    scratch: CoefFirst,
}

impl VariationalCoefficients {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            b0: vec![0.0; n * n],
            pi0: vec![0.0; n * n],
            b1u: vec![0.0; n],
            pi1u: vec![0.0; n],
            b2: (0..n).map(|_| CoefSecond::new(n)).collect(),
            s2: (0..n).map(|_| CoefSecond::new(n)).collect(),
            scratch: CoefFirst::new(n),
        }
    }

    /// Evaluate at `(t, x, u)`; second partials only when `second` is set.
    pub fn fill(&mut self, spec: &GameSpec, t: f64, x: &[f64], u: &[f64], second: bool) {
        let n = self.n;
        for m in 0..n {
            spec.drift.first(m, t, x[m], x, u[m], &mut self.scratch);
            let row = &mut self.b0[m * n..(m + 1) * n];
            row.copy_from_slice(&self.scratch.dy);
            row[m] += self.scratch.dx;
            self.b1u[m] = self.scratch.du;
            spec.diffusion.first(m, t, x[m], x, u[m], &mut self.scratch);
            let row = &mut self.pi0[m * n..(m + 1) * n];
            row.copy_from_slice(&self.scratch.dy);
            row[m] += self.scratch.dx;
            self.pi1u[m] = self.scratch.du;
            if second {
                spec.drift.second(m, t, x[m], x, u[m], &mut self.b2[m]);
                spec.diffusion.second(m, t, x[m], x, u[m], &mut self.s2[m]);
            }
        }
    }

    /// `π_j`, the only nonzero row of `Π0^j`.
    #[inline]
    pub fn pi_row(&self, j: usize) -> &[f64] {
        &self.pi0[j * self.n..(j + 1) * self.n]
    }

    /// Dense `Π0^j` (for inspection and tests).
    pub fn pi0_dense(&self, j: usize) -> Vec<f64> {
        let n = self.n;
        let mut m = vec![0.0; n * n];
        m[j * n..(j + 1) * n].copy_from_slice(self.pi_row(j));
        m
    }

    /// `B0 v`.
    #[inline]
    pub fn b0_mul(&self, v: &[f64], out: &mut [f64]) {
        let n = self.n;
        for m in 0..n {
            let row = &self.b0[m * n..(m + 1) * n];
            out[m] = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }

    /// `π_j · v` (component `j` of `Π0^j v`).
    #[inline]
    pub fn pi_dot(&self, j: usize, v: &[f64]) -> f64 {
        self.pi_row(j).iter().zip(v).map(|(a, b)| a * b).sum()
    }
}

/// Allocate and fill the variational coefficients at one point.
pub fn assemble_variational(spec: &GameSpec, x: &[f64], u: &[f64], t: f64) -> VariationalCoefficients {
    let mut v = VariationalCoefficients::new(spec.n_players);
    v.fill(spec, t, x, u, true);
    v
}

/// `aᵀ H^φ_m b` for the state Hessian of coefficient `m`.
#[inline]
pub fn state_hess_bilinear(m: usize, s: &CoefSecond, a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut v = a[m] * b[m] * s.dxx;
    let mut da = 0.0;
    let mut db = 0.0;
    for q in 0..n {
        da += s.dxy[q] * a[q];
        db += s.dxy[q] * b[q];
    }
    v += a[m] * db + b[m] * da;
    for p in 0..n {
        if a[p] == 0.0 {
            continue;
        }
        let row = &s.dyy[p * n..(p + 1) * n];
        v += a[p] * row.iter().zip(b).map(|(h, y)| h * y).sum::<f64>();
    }
    v
}

/// `Σ_q ∂²φ_m/∂X_q∂u_m · v_q = v_m ∂_xu φ_m + Σ_q ∂_{u y_q} φ_m v_q`.
#[inline]
pub fn state_control_mixed(m: usize, s: &CoefSecond, v: &[f64]) -> f64 {
    v[m] * s.dxu + s.duy.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
}

/// Add `w · H^φ_m` into the dense N×N matrix `out`.
#[inline]
pub fn add_state_hess(m: usize, s: &CoefSecond, w: f64, out: &mut [f64]) {
    if w == 0.0 {
        return;
    }
    let n = s.dxy.len();
    for (o, h) in out.iter_mut().zip(&s.dyy) {
        *o += w * h;
    }
    out[m * n + m] += w * s.dxx;
    for q in 0..n {
        out[m * n + q] += w * s.dxy[q];
        out[q * n + m] += w * s.dxy[q];
    }
}
