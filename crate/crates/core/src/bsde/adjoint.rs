// SPDX-License-Identifier: MIT OR Apache-2.0

//! First- and second-order adjoint equations of the N-player game.
//!
//! First adjoint of player `i` (vector in ℝ^N), discretized so that duality
//! with the Euler tangent recursion is exact:
//!
//! ```text
//! P_M = ∂_x g_i(X_M)
//! P_k = P̄_k + dt (B0ᵀ P̄_k + Σ_j π_j Q^j_{k,j} + ∂_x f_i)
//! P̄_k = E[P_{k+1} | X_k],   Q^j_k = E[P_{k+1} ΔW^j_k | X_k] / dt
//! ```
//!
//! Second adjoint of player `i` (symmetric N×N matrix):
//!
//! ```text
//! 𝒫_M = ∂_xx g_i(X_M)
//! 𝒫_k = 𝒫̄_k + dt F_k
//! F   = B0ᵀ𝒫̄ + 𝒫̄B0 + Σ_j [π_j π_jᵀ 𝒫̄_jj + π_j ⊗ row_j(𝒬^j) + col_j(𝒬^j) ⊗ π_j]
//!       + ∂_xx f_i + Σ_m P̄_m H^b_m + Σ_m Q^m_m H^σ_m
//! ```
//!
//! where `H^φ_m` is the state Hessian of coefficient `φ_m` and `(P̄, Q)` is
//! the first adjoint of the same player. Only the entries of `Q^j` and `𝒬^j`
//! that enter the drivers are regressed.

use crate::bsde::basis::RegressionBasis;
use crate::bsde::linear::{solve_linear_bsde, BsdeSolution, LinearBsde};
use crate::error::{Error, Result};
use crate::model::{CostFirst, CostSecond, GameSpec, NoiseBundle};
use crate::sim::variational::{add_state_hess, VariationalCoefficients};
use crate::sim::PathEnsemble;

/// First adjoints of all players, stacked as `y[i·N + q]`.
#[derive(Clone)]
pub struct FirstAdjoint<'a> {
    spec: &'a GameSpec,
}

impl<'a> FirstAdjoint<'a> {
    pub fn new(spec: &'a GameSpec) -> Self {
        Self { spec }
    }
}

/// Scratch for [`FirstAdjoint`].
pub struct FirstWork {
    var: VariationalCoefficients,
    cost: CostFirst,
}

impl LinearBsde for FirstAdjoint<'_> {
    type Work = FirstWork;

    fn work(&self) -> FirstWork {
        let n = self.spec.n_players;
        FirstWork {
            var: VariationalCoefficients::new(n),
            cost: CostFirst::new(n),
        }
    }

    fn dim(&self) -> usize {
        self.spec.n_players * self.spec.n_players
    }

    fn n_drivers(&self) -> usize {
        self.spec.n_players
    }

    fn z_mask(&self) -> Option<Vec<bool>> {
        let n = self.spec.n_players;
        let m = n * n;
        let mut mask = vec![false; n * m];
        for j in 0..n {
            for i in 0..n {
                mask[j * m + i * n + j] = true;
            }
        }
        Some(mask)
    }

    fn terminal(&self, p: usize, ens: &PathEnsemble, out: &mut [f64]) {
        let n = self.spec.n_players;
        let x = ens.x(p, ens.grid.n_steps);
        for i in 0..n {
            self.spec.terminal.first(i, x, &mut out[i * n..(i + 1) * n]);
        }
    }

    fn driver(
        &self,
        k: usize,
        p: usize,
        ens: &PathEnsemble,
        ybar: &[f64],
        z: &[f64],
        out: &mut [f64],
        w: &mut FirstWork,
    ) {
        let n = self.spec.n_players;
        let m = n * n;
        let t = ens.grid.t(k);
        let x = ens.x(p, k);
        let u = ens.u(p, k);
        w.var.fill(self.spec, t, x, u, false);
        for i in 0..n {
            self.spec.running.first(i, t, x, u, &mut w.cost);
            let yb = &ybar[i * n..(i + 1) * n];
            let o = &mut out[i * n..(i + 1) * n];
            o.copy_from_slice(&w.cost.dy);
            for r in 0..n {
                let br = &w.var.b0[r * n..(r + 1) * n];
                let qj = z[r * m + i * n + r];
                let pr = w.var.pi_row(r);
                for q in 0..n {
                    o[q] += br[q] * yb[r] + pr[q] * qj;
                }
            }
        }
    }
}

/// Regression solution of the stacked first adjoints.
#[derive(Debug, Clone)]
pub struct AdjointSolution {
    pub n_players: usize,
    pub bsde: BsdeSolution,
}

impl AdjointSolution {
    /// Buffers sized for [`eval`](Self::eval): `(features, P̄ [N²], Q [N·N²])`.
    pub fn buffers(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.n_players;
        (vec![0.0; self.bsde.max_basis()], vec![0.0; n * n], vec![0.0; n * n * n])
    }

    /// Evaluate `P̄_k(x)` and `Q_k(x)` for all players.
    #[inline]
    pub fn eval(&self, k: usize, x: &[f64], feat: &mut [f64], pbar: &mut [f64], q: &mut [f64]) {
        self.bsde.eval(k, x, feat, pbar, q);
    }

    /// `Q^j_{k,j}` of player `i` from the stacked `Q` buffer.
    #[inline]
    pub fn q_diag(&self, q: &[f64], i: usize, j: usize) -> f64 {
        let n = self.n_players;
        q[j * n * n + i * n + j]
    }

    /// Pathwise `P_k` of all players (terminal gradient at `k = M`).
    pub fn p_at(&self, spec: &GameSpec, ens: &PathEnsemble, k: usize, p: usize, out: &mut [f64]) {
        let adj = FirstAdjoint::new(spec);
        let mut w = adj.work();
        let (mut f, mut pb, mut q) = self.buffers();
        self.bsde.y_at(&adj, ens, k, p, &mut f, &mut pb, &mut q, &mut w, out);
    }
}

/// Solve the first adjoints of every player on the ensemble.
pub fn solve_adjoint(
    spec: &GameSpec,
    ens: &PathEnsemble,
    noise: &NoiseBundle,
    basis: &RegressionBasis,
) -> Result<AdjointSolution> {
    if ens.n_players != spec.n_players {
        return Err(Error::Mismatch("ensemble and game disagree on N".into()));
    }
    let bsde = solve_linear_bsde(&FirstAdjoint::new(spec), ens, noise, basis)?;
    Ok(AdjointSolution {
        n_players: spec.n_players,
        bsde,
    })
}

/// Second adjoint of one player, flattened row-major N×N.
pub struct SecondAdjoint<'a> {
    spec: &'a GameSpec,
    first: &'a AdjointSolution,
    player: usize,
}

impl<'a> SecondAdjoint<'a> {
    pub fn new(spec: &'a GameSpec, first: &'a AdjointSolution, player: usize) -> Self {
        Self { spec, first, player }
    }
}

/// Scratch for [`SecondAdjoint`].
pub struct SecondWork {
    var: VariationalCoefficients,
    cost: CostSecond,
    feat: Vec<f64>,
    pbar: Vec<f64>,
    q: Vec<f64>,
    f: Vec<f64>,
}

impl LinearBsde for SecondAdjoint<'_> {
    type Work = SecondWork;

    fn work(&self) -> SecondWork {
        let n = self.spec.n_players;
        let (feat, pbar, q) = self.first.buffers();
        SecondWork {
            var: VariationalCoefficients::new(n),
            cost: CostSecond::new(n),
            feat,
            pbar,
            q,
            f: vec![0.0; n * n],
        }
    }

    fn dim(&self) -> usize {
        self.spec.n_players * self.spec.n_players
    }

    fn n_drivers(&self) -> usize {
        self.spec.n_players
    }

    fn z_mask(&self) -> Option<Vec<bool>> {
        let n = self.spec.n_players;
        let m = n * n;
        let mut mask = vec![false; n * m];
        for j in 0..n {
            for r in 0..n {
                for c in 0..n {
                    mask[j * m + r * n + c] = r == j || c == j;
                }
            }
        }
        Some(mask)
    }

    fn terminal(&self, p: usize, ens: &PathEnsemble, out: &mut [f64]) {
        self.spec.terminal.second(self.player, ens.x(p, ens.grid.n_steps), out);
    }

    fn driver(
        &self,
        k: usize,
        p: usize,
        ens: &PathEnsemble,
        ybar: &[f64],
        z: &[f64],
        out: &mut [f64],
        w: &mut SecondWork,
    ) {
        let n = self.spec.n_players;
        let m = n * n;
        let i = self.player;
        let t = ens.grid.t(k);
        let x = ens.x(p, k);
        let u = ens.u(p, k);
        w.var.fill(self.spec, t, x, u, true);
        self.first.eval(k, x, &mut w.feat, &mut w.pbar, &mut w.q);
        self.spec.running.second(i, t, x, u, &mut w.cost);
        let f = &mut w.f;
        f.copy_from_slice(&w.cost.dyy);
        let b0 = &w.var.b0;
        // B0ᵀ𝒫̄ + 𝒫̄B0
        for r in 0..n {
            for c in 0..n {
                let mut v = 0.0;
                for s in 0..n {
                    v += b0[s * n + r] * ybar[s * n + c] + ybar[r * n + s] * b0[s * n + c];
                }
                f[r * n + c] += v;
            }
        }
        for j in 0..n {
            let pi = w.var.pi_row(j);
            let pjj = ybar[j * n + j];
            let zj = &z[j * m..(j + 1) * m];
            for r in 0..n {
                for c in 0..n {
                    f[r * n + c] += pi[r] * pi[c] * pjj + pi[r] * zj[j * n + c] + zj[r * n + j] * pi[c];
                }
            }
        }
        let pb = &w.pbar[i * n..(i + 1) * n];
        for mm in 0..n {
            add_state_hess(mm, &w.var.b2[mm], pb[mm], f);
            let qmm = self.first.q_diag(&w.q, i, mm);
            add_state_hess(mm, &w.var.s2[mm], qmm, f);
        }
        for r in 0..n {
            for c in 0..n {
                out[r * n + c] = 0.5 * (f[r * n + c] + f[c * n + r]);
            }
        }
    }
}

/// Regression solution of one player's second adjoint.
#[derive(Debug, Clone)]
pub struct SecondAdjointSolution {
    pub player: usize,
    pub n_players: usize,
    pub bsde: BsdeSolution,
}

impl SecondAdjointSolution {
    /// Buffers sized for [`eval`](Self::eval): `(features, 𝒫̄ [N²], 𝒬 [N·N²])`.
    pub fn buffers(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.n_players;
        (vec![0.0; self.bsde.max_basis()], vec![0.0; n * n], vec![0.0; n * n * n])
    }

    /// Evaluate `𝒫̄_k(x)` and `𝒬_k(x)` (`𝒬^j` at offset `j·N²`).
    #[inline]
    pub fn eval(&self, k: usize, x: &[f64], feat: &mut [f64], pbar: &mut [f64], q: &mut [f64]) {
        self.bsde.eval(k, x, feat, pbar, q);
    }
}

/// Solve the second adjoint of `player` given the first adjoints.
pub fn solve_second_adjoint(
    spec: &GameSpec,
    first: &AdjointSolution,
    player: usize,
    ens: &PathEnsemble,
    noise: &NoiseBundle,
    basis: &RegressionBasis,
) -> Result<SecondAdjointSolution> {
    if player >= spec.n_players {
        return Err(Error::InvalidParameters(format!("player {player} out of range")));
    }
    if first.n_players != spec.n_players || first.bsde.n_steps != ens.grid.n_steps {
        return Err(Error::Mismatch(
            "first adjoint was solved on another game or grid".into(),
        ));
    }
    let bsde = solve_linear_bsde(&SecondAdjoint::new(spec, first, player), ens, noise, basis)?;
    Ok(SecondAdjointSolution {
        player,
        n_players: spec.n_players,
        bsde,
    })
}
