// SPDX-License-Identifier: MIT OR Apache-2.0

//! Lipschitz/coupling constants and cost-gap sup-norms.
//!
//! For each player the coefficients obey
//!
//! ```text
//! |φ_i(t,0,0,u)| ≤ L^φ (1 + |u|)
//! |∂_xφ_i| + |∂_uφ_i| + |∂_uuφ_i| ≤ L^φ,     |∂_xxφ_i| + |∂_xuφ_i| ≤ L^φ
//! |∂_{y_j}φ_i| ≤ L_y^φ / N,                 |∂_{x y_j}φ_i| + |∂_{u y_j}φ_i| ≤ L_y^φ / N
//! |∂_{y_j y_k}φ_i| ≤ L_y^φ / N  (j = k),    L_y^φ / N²  (j ≠ k)
//! L_y^{b,σ} = L_y^b + 3 (L_y^σ)²
//! ```
//!
//! and, for every ordered pair `(i, j)`, the gaps `Δ^f = f_i − f_j`,
//! `Δ^g = g_i − g_j` enter the α bounds through the sup-norms of their second
//! derivatives and the size of their gradients at the origin.

use crate::model::game::{CostFirst, CostSecond, GameSpec};
use serde::{Deserialize, Serialize};

/// Sup-norm data of the cost gap of one ordered pair `(i, j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapNorms {
    /// `‖∂²_{x_h x_ℓ}Δ^f‖`, row-major N×N.
    pub fxx: Vec<f64>,
    /// `‖∂²_{x_h u_ℓ}Δ^f‖`, `[x index][u index]`.
    pub fxu: Vec<f64>,
    /// `‖∂²_{u_h u_ℓ}Δ^f‖`.
    pub fuu: Vec<f64>,
    /// `‖∂²_{x_h x_ℓ}Δ^g‖`.
    pub gxx: Vec<f64>,
    /// `sup_t |∂_{x_ℓ}Δ^f(t, 0, 0)|`.
    pub fx0: Vec<f64>,
    /// `|∂_{x_ℓ}Δ^g(0)|`.
    pub gx0: Vec<f64>,
}

impl GapNorms {
    pub fn zeros(n: usize) -> Self {
        Self {
            fxx: vec![0.0; n * n],
            fxu: vec![0.0; n * n],
            fuu: vec![0.0; n * n],
            gxx: vec![0.0; n * n],
            fx0: vec![0.0; n],
            gx0: vec![0.0; n],
        }
    }

    /// Multiply every entry by `s ≥ 0`.
    pub fn scaled(&self, s: f64) -> Self {
        let f = |v: &Vec<f64>| v.iter().map(|x| x * s).collect();
        Self {
            fxx: f(&self.fxx),
            fxu: f(&self.fxu),
            fuu: f(&self.fuu),
            gxx: f(&self.gxx),
            fx0: f(&self.fx0),
            gx0: f(&self.gx0),
        }
    }

    fn all(&self) -> impl Iterator<Item = &f64> {
        self.fxx
            .iter()
            .chain(&self.fxu)
            .chain(&self.fuu)
            .chain(&self.gxx)
            .chain(&self.fx0)
            .chain(&self.gx0)
    }
}

/// The constants of the dynamics and the cost-gap table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantLedger {
    pub n_players: usize,
    pub l_b: f64,
    pub l_y_b: f64,
    pub l_sigma: f64,
    pub l_y_sigma: f64,
    /// `L_y^b + 3 (L_y^σ)²`.
    pub l_y_b_sigma: f64,
    /// Ordered pairs, index `i·N + j`; diagonal entries are zero.
    pub gaps: Vec<GapNorms>,
    /// True when the gap norms were estimated by sampling rather than derived.
    pub gaps_sampled: bool,
}

impl ConstantLedger {
    pub fn new(n_players: usize, l_b: f64, l_y_b: f64, l_sigma: f64, l_y_sigma: f64) -> Self {
        Self {
            n_players,
            l_b,
            l_y_b,
            l_sigma,
            l_y_sigma,
            l_y_b_sigma: l_y_b + 3.0 * l_y_sigma * l_y_sigma,
            gaps: vec![GapNorms::zeros(n_players); n_players * n_players],
            gaps_sampled: false,
        }
    }

    pub fn gap(&self, i: usize, j: usize) -> &GapNorms {
        &self.gaps[i * self.n_players + j]
    }

    pub fn gap_mut(&mut self, i: usize, j: usize) -> &mut GapNorms {
        &mut self.gaps[i * self.n_players + j]
    }

    /// Every entry nonnegative and finite, and the derived constant consistent.
    pub fn is_consistent(&self) -> bool {
        let scalars = [self.l_b, self.l_y_b, self.l_sigma, self.l_y_sigma, self.l_y_b_sigma];
        scalars.iter().all(|v| v.is_finite() && *v >= 0.0)
            && self.l_y_b_sigma == self.l_y_b + 3.0 * self.l_y_sigma * self.l_y_sigma
            && self.gaps.len() == self.n_players * self.n_players
            && self.gaps.iter().all(|g| g.all().all(|v| v.is_finite() && *v >= 0.0))
    }

    /// Fill the gap table by low-discrepancy sampling over a box; marks the
    /// ledger as sampled.
    pub fn fill_gaps_sampled(&mut self, spec: &GameSpec, bx: &crate::model::SampleBox, n_points: usize) {
        self.gaps = sampled_gap_norms(spec, bx, n_points);
        self.gaps_sampled = true;
    }
}

/// Radical-inverse (Halton) coordinate of `index` in base `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// First `n` primes (Halton bases).
pub fn primes(n: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(n);
    let mut c = 2u64;
    while out.len() < n {
        if out.iter().all(|p| !c.is_multiple_of(*p)) {
            out.push(c);
        }
        c += 1;
    }
    out
}

/// Estimate the cost-gap sup-norms on a box with a Halton point set.
pub fn sampled_gap_norms(spec: &GameSpec, bx: &crate::model::SampleBox, n_points: usize) -> Vec<GapNorms> {
    let n = spec.n_players;
    let bases = primes(1 + 2 * n);
    let mut out = vec![GapNorms::zeros(n); n * n];
    let mut si: Vec<CostSecond> = (0..n).map(|_| CostSecond::new(n)).collect();
    let mut gi: Vec<Vec<f64>> = vec![vec![0.0; n * n]; n];
    let mut y = vec![0.0; n];
    let mut u = vec![0.0; n];
    for s in 1..=n_points as u64 {
        let t = bx.t.0 + (bx.t.1 - bx.t.0) * radical_inverse(s, bases[0]);
        for k in 0..n {
            y[k] = bx.x.0 + (bx.x.1 - bx.x.0) * radical_inverse(s, bases[1 + k]);
            u[k] = bx.u.0 + (bx.u.1 - bx.u.0) * radical_inverse(s, bases[1 + n + k]);
        }
        for i in 0..n {
            spec.running.second(i, t, &y, &u, &mut si[i]);
            spec.terminal.second(i, &y, &mut gi[i]);
        }
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let g = &mut out[i * n + j];
                for e in 0..n * n {
                    g.fxx[e] = g.fxx[e].max((si[i].dyy[e] - si[j].dyy[e]).abs());
                    g.fxu[e] = g.fxu[e].max((si[i].dyu[e] - si[j].dyu[e]).abs());
                    g.fuu[e] = g.fuu[e].max((si[i].duu[e] - si[j].duu[e]).abs());
                    g.gxx[e] = g.gxx[e].max((gi[i][e] - gi[j][e]).abs());
                }
            }
        }
    }
    // gradients at the origin
    let zero = vec![0.0; n];
    let mut fi: Vec<CostFirst> = (0..n).map(|_| CostFirst::new(n)).collect();
    let mut gg: Vec<Vec<f64>> = vec![vec![0.0; n]; n];
    for i in 0..n {
        spec.terminal.first(i, &zero, &mut gg[i]);
    }
    let n_t = 64usize;
    for s in 0..=n_t {
        let t = bx.t.0 + (bx.t.1 - bx.t.0) * s as f64 / n_t as f64;
        for i in 0..n {
            spec.running.first(i, t, &zero, &zero, &mut fi[i]);
        }
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let g = &mut out[i * n + j];
                for l in 0..n {
                    g.fx0[l] = g.fx0[l].max((fi[i].dy[l] - fi[j].dy[l]).abs());
                    g.gx0[l] = (gg[i][l] - gg[j][l]).abs();
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_constant_exact() {
        let l = ConstantLedger::new(3, 1.0, 0.5, 0.3, 0.2);
        assert_eq!(l.l_y_b_sigma, 0.5 + 3.0 * 0.2 * 0.2);
        assert!(l.is_consistent());
    }

    #[test]
    fn halton_in_unit_interval() {
        for s in 1..100 {
            let v = radical_inverse(s, 3);
            assert!((0.0..1.0).contains(&v));
        }
        assert_eq!(primes(5), vec![2, 3, 5, 7, 11]);
    }
}
