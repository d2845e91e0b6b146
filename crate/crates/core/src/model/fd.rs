// SPDX-License-Identifier: MIT OR Apache-2.0

//! Finite-difference-backed evaluators for prototyping custom games.
//!
//! Only a value function is supplied; partials come from central differences
//!
//! ```text
//! ∂_x φ ≈ [φ(x + h) − φ(x − h)] / 2h,              h = 1e-5 (1 + |x|)
//! ∂²_{xz} φ ≈ [∂_x φ(z + h₂) − ∂_x φ(z − h₂)] / 2h₂, h₂ = 1e-4 (1 + |z|)
//! ```
//!
//! The coarser second step keeps the nested difference above round-off.

use crate::model::game::{CoefFirst, CoefSecond, StateCoefficient};

type ValueFn = dyn Fn(usize, f64, f64, &[f64], f64) -> f64 + Send + Sync;

/// State coefficient given by its value only.
pub struct FdCoefficient {
    n: usize,
    f: Box<ValueFn>,
}

#[inline]
fn h1(x: f64) -> f64 {
    1e-5 * (1.0 + x.abs())
}

#[inline]
fn h2(x: f64) -> f64 {
    1e-4 * (1.0 + x.abs())
}

impl FdCoefficient {
    pub fn new(n: usize, f: impl Fn(usize, f64, f64, &[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { n, f: Box::new(f) }
    }

    fn grad(&self, i: usize, t: f64, x: f64, y: &[f64], u: f64, out: &mut CoefFirst) {
        let f = &self.f;
        out.value = f(i, t, x, y, u);
        let h = h1(x);
        out.dx = (f(i, t, x + h, y, u) - f(i, t, x - h, y, u)) / (2.0 * h);
        let h = h1(u);
        out.du = (f(i, t, x, y, u + h) - f(i, t, x, y, u - h)) / (2.0 * h);
        let mut yp = y.to_vec();
        for j in 0..self.n {
            let h = h1(y[j]);
            yp[j] = y[j] + h;
            let a = f(i, t, x, &yp, u);
            yp[j] = y[j] - h;
            let b = f(i, t, x, &yp, u);
            yp[j] = y[j];
            out.dy[j] = (a - b) / (2.0 * h);
        }
    }
}

impl StateCoefficient for FdCoefficient {
    fn value(&self, i: usize, t: f64, x: f64, y: &[f64], u: f64) -> f64 {
        (self.f)(i, t, x, y, u)
    }

    fn first(&self, i: usize, t: f64, x: f64, y: &[f64], u: f64, out: &mut CoefFirst) {
        self.grad(i, t, x, y, u, out);
    }

    fn second(&self, i: usize, t: f64, x: f64, y: &[f64], u: f64, out: &mut CoefSecond) {
        let n = self.n;
        let mut p = CoefFirst::new(n);
        let mut m = CoefFirst::new(n);
        let h = h2(x);
        self.grad(i, t, x + h, y, u, &mut p);
        self.grad(i, t, x - h, y, u, &mut m);
        out.dxx = (p.dx - m.dx) / (2.0 * h);
        let h = h2(u);
        self.grad(i, t, x, y, u + h, &mut p);
        self.grad(i, t, x, y, u - h, &mut m);
        out.duu = (p.du - m.du) / (2.0 * h);
        out.dxu = (p.dx - m.dx) / (2.0 * h);
        let mut yp = y.to_vec();
        for j in 0..n {
            let h = h2(y[j]);
            yp[j] = y[j] + h;
            self.grad(i, t, x, &yp, u, &mut p);
            yp[j] = y[j] - h;
            self.grad(i, t, x, &yp, u, &mut m);
            yp[j] = y[j];
            out.dxy[j] = (p.dx - m.dx) / (2.0 * h);
            out.duy[j] = (p.du - m.du) / (2.0 * h);
            for k in 0..n {
                out.dyy[k * n + j] = (p.dy[k] - m.dy[k]) / (2.0 * h);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_analytic_partials() {
        let c = FdCoefficient::new(2, |_, _, x, y, u| x.sin() * u + (y[0] + 2.0 * y[1]).tanh() * 0.5);
        let (x, u, y) = (0.3, 0.7, [0.2, -0.4]);
        let mut f = CoefFirst::new(2);
        let mut s = CoefSecond::new(2);
        c.first(0, 0.0, x, &y, u, &mut f);
        c.second(0, 0.0, x, &y, u, &mut s);
        assert!((f.dx - x.cos() * u).abs() < 1e-8);
        assert!((f.du - x.sin()).abs() < 1e-8);
        assert!((s.dxu - x.cos()).abs() < 1e-6);
        assert!((s.dxx + x.sin() * u).abs() < 1e-6);
        let z: f64 = y[0] + 2.0 * y[1];
        let sech2 = 1.0 - z.tanh().powi(2);
        let d2 = -2.0 * z.tanh() * sech2 * 0.5;
        assert!((s.dyy[1] - 2.0 * d2).abs() < 1e-5);
    }
}
