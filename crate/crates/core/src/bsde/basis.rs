// SPDX-License-Identifier: MIT OR Apache-2.0

//! Polynomial regression basis and ridge least squares.
//!
//! Coordinates are standardized per time step, `z_a = (x_a − m_a)/s_a`;
//! coordinates with no spread (for instance a deterministic initial state)
//! are dropped. The basis of total degree ≤ 2 is
//!
//! ```text
//! φ(x) = [1, z_a (a active), z_a z_b (a ≤ b active)]
//! ```
//!
//! Coefficients solve `(G/n + λD) β = R/n` with `G = Σ φφᵀ`, `R = Σ φ·target`
//! and `D = diag(0, 1, …, 1)` (the intercept is not penalized). The condition
//! number of the penalized Gram matrix is estimated from its eigenvalues; when
//! it exceeds `cond_max`, `λ` is escalated ×10 up to `ridge_max`.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// Regression configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionBasis {
    /// Total polynomial degree (1 or 2).
    pub degree: usize,
    pub ridge: f64,
    pub ridge_max: f64,
    pub cond_max: f64,
}

impl Default for RegressionBasis {
    fn default() -> Self {
        Self {
            degree: 2,
            ridge: 1e-8,
            ridge_max: 1e-2,
            cond_max: 1e12,
        }
    }
}

/// Standardization and layout of the basis at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedBasis {
    pub degree: usize,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub active: Vec<usize>,
    pub size: usize,
}

impl FittedBasis {
    /// Fit standardization from `n` state vectors produced by `x(path)`.
    pub fn fit<'a, F>(degree: usize, dim: usize, n: usize, x: F) -> Self
    where
        F: Fn(usize) -> &'a [f64],
    {
        let mut mean = vec![0.0; dim];
        let mut m2 = vec![0.0; dim];
        for p in 0..n {
            let v = x(p);
            for a in 0..dim {
                let d = v[a] - mean[a];
                mean[a] += d / (p + 1) as f64;
                m2[a] += d * (v[a] - mean[a]);
            }
        }
        let mut scale = vec![1.0; dim];
        let mut active = Vec::new();
        for a in 0..dim {
            let sd = if n > 1 { (m2[a] / (n - 1) as f64).sqrt() } else { 0.0 };
            if sd > 1e-12 * (1.0 + mean[a].abs()) {
                scale[a] = sd;
                active.push(a);
            }
        }
        let na = active.len();
        let size = 1 + na + if degree >= 2 { na * (na + 1) / 2 } else { 0 };
        Self {
            degree,
            mean,
            scale,
            active,
            size,
        }
    }

    /// Evaluate the basis at `x` into `out` (length [`size`](Self::size)).
    #[inline]
    pub fn features(&self, x: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
        let na = self.active.len();
        for (r, &a) in self.active.iter().enumerate() {
            out[1 + r] = (x[a] - self.mean[a]) / self.scale[a];
        }
        if self.degree >= 2 {
            let mut c = 1 + na;
            for r in 0..na {
                let zr = out[1 + r];
                for s in r..na {
                    out[c] = zr * out[1 + s];
                    c += 1;
                }
            }
        }
    }
}

/// Outcome of one ridge solve.
#[derive(Debug, Clone)]
pub struct RidgeSolution {
    /// `[basis][target]`, row-major K×q.
    pub beta: Vec<f64>,
    pub ridge: f64,
    pub condition: f64,
}

/// Solve the normal equations with ridge escalation.
pub fn ridge_solve(
    gram: &[f64],
    rhs: &[f64],
    k: usize,
    q: usize,
    n: usize,
    cfg: &RegressionBasis,
    step: usize,
) -> Result<RidgeSolution> {
    let inv_n = 1.0 / n as f64;
    let g = DMatrix::from_fn(k, k, |r, c| gram[r * k + c] * inv_n);
    let b = DMatrix::from_fn(k, q, |r, c| rhs[r * q + c] * inv_n);
    let mut lambda = cfg.ridge;
    loop {
        let mut a = g.clone();
        for d in 1..k {
            a[(d, d)] += lambda;
        }
        let eig = SymmetricEigen::new(a.clone());
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for &e in eig.eigenvalues.iter() {
            lo = lo.min(e.abs());
            hi = hi.max(e.abs());
        }
        let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if cond <= cfg.cond_max {
            let beta = match a.clone().cholesky() {
                Some(ch) => ch.solve(&b),
                None => {
                    // Symmetric but not numerically positive: solve via eigenpairs.
                    let mut inv = DMatrix::zeros(k, k);
                    for (idx, &e) in eig.eigenvalues.iter().enumerate() {
                        let v = eig.eigenvectors.column(idx);
                        inv += (v * v.transpose()) / e;
                    }
                    inv * &b
                }
            };
            let mut out = vec![0.0; k * q];
            for r in 0..k {
                for c in 0..q {
                    out[r * q + c] = beta[(r, c)];
                }
            }
            return Ok(RidgeSolution {
                beta: out,
                ridge: lambda,
                condition: cond,
            });
        }
        if lambda >= cfg.ridge_max {
            return Err(Error::SingularRegression { step, condition: cond });
        }
        lambda = (lambda * 10.0).max(1e-12).min(cfg.ridge_max);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_coordinates_dropped() {
        let xs = [[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]];
        let fb = FittedBasis::fit(2, 2, 3, |p| &xs[p][..]);
        assert_eq!(fb.active, vec![1]);
        assert_eq!(fb.size, 3);
        let mut f = vec![0.0; 3];
        fb.features(&xs[2], &mut f);
        assert_eq!(f[0], 1.0);
        assert!((f[2] - f[1] * f[1]).abs() < 1e-15);
    }

    #[test]
    fn exact_quadratic_recovered() {
        // target = 2 + 3x − x², regressed on [1, z, z²]
        let xs: Vec<[f64; 1]> = (0..200).map(|i| [i as f64 / 50.0 - 2.0]).collect();
        let fb = FittedBasis::fit(2, 1, xs.len(), |p| &xs[p][..]);
        let k = fb.size;
        let mut g = vec![0.0; k * k];
        let mut r = vec![0.0; k];
        let mut f = vec![0.0; k];
        for x in &xs {
            fb.features(x, &mut f);
            let y = 2.0 + 3.0 * x[0] - x[0] * x[0];
            for a in 0..k {
                r[a] += f[a] * y;
                for b in 0..k {
                    g[a * k + b] += f[a] * f[b];
                }
            }
        }
        let cfg = RegressionBasis {
            ridge: 0.0,
            ..Default::default()
        };
        let sol = ridge_solve(&g, &r, k, 1, xs.len(), &cfg, 0).unwrap();
        let x = 0.37;
        fb.features(&[x], &mut f);
        let pred: f64 = (0..k).map(|a| f[a] * sol.beta[a]).sum();
        assert!((pred - (2.0 + 3.0 * x - x * x)).abs() < 1e-9);
    }
}
