// SPDX-License-Identifier: MIT OR Apache-2.0

//! The α-potential function and unilateral-deviation gaps.
//!
//! ```text
//! Φ(a) = ∫₀¹ Σ_j δV_j/δu_j (z + r(a − z); a_j − z_j) dr
//! gap_i(a, a'_i) = | [V_i(a'_i, a_{−i}) − V_i(a)] − [Φ(a'_i, a_{−i}) − Φ(a)] |
//! ```
//!
//! The anchor `z` defaults to the zero profile. The `r`-integral uses
//! Gauss–Legendre quadrature on `[0, 1]` with nodes and weights from the
//! Golub–Welsch eigenproblem of the Jacobi matrix
//!
//! ```text
//! J_{k,k+1} = J_{k+1,k} = k / sqrt(4k² − 1),   x_q = eig(J),   w_q = 2 v_{q,0}²
//! ```
//!
//! Each node's integrand is the first-order adjoint formula evaluated on the
//! ensemble of the interpolated profile. Cost differences `ΔV_i` are formed
//! pathwise under common random numbers.

use crate::bsde::{solve_adjoint, RegressionBasis};
use crate::derivatives::first_derivatives_bsde;
use crate::error::{Error, Result};
use crate::model::{ControlProfile, GameSpec, NoiseBundle, ScalarControl, TimeGrid};
use crate::sim::paths::cost_pass;
use crate::sim::{simulate_paths, DirSpec};
use crate::stats::Estimate;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// Default quadrature order of the potential integral.
pub const DEFAULT_ORDER: usize = 8;

/// Gauss–Legendre nodes and weights on `[0, 1]`, nodes ascending.
pub fn gauss_legendre(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if order == 0 {
        return Err(Error::InvalidParameters("quadrature order must be ≥ 1".into()));
    }
    let mut jac = DMatrix::<f64>::zeros(order, order);
    for k in 1..order {
        let kf = k as f64;
        let b = kf / (4.0 * kf * kf - 1.0).sqrt();
        jac[(k - 1, k)] = b;
        jac[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|q| {
            let v0 = eig.eigenvectors[(0, q)];
            (0.5 * (eig.eigenvalues[q] + 1.0), v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs.into_iter().unzip())
}

/// Settings shared by potential evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialConfig {
    pub order: usize,
    pub basis: RegressionBasis,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self {
            order: DEFAULT_ORDER,
            basis: RegressionBasis::default(),
        }
    }
}

/// `Φ(a)` with the quadrature integrand at every node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialValue {
    pub value: Estimate,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub integrand: Vec<Estimate>,
}

fn check_profiles(spec: &GameSpec, a: &ControlProfile, z: &ControlProfile) -> Result<()> {
    let n = spec.n_players;
    if a.n_players() != n || z.n_players() != n {
        return Err(Error::Mismatch(format!(
            "profiles have {} and {} players, game has {n}",
            a.n_players(),
            z.n_players()
        )));
    }
    Ok(())
}

/// `Σ_j δV_j/δu_j (u; d_j)` by the adjoint formula.
pub fn gradient_pairing(
    spec: &GameSpec,
    u: &ControlProfile,
    d: &[ScalarControl],
    grid: &TimeGrid,
    noise: &NoiseBundle,
    basis: &RegressionBasis,
) -> Result<Estimate> {
    let ens = simulate_paths(spec, u, grid, noise)?;
    let adj = solve_adjoint(spec, &ens, noise, basis)?;
    let dirs: Vec<DirSpec> = d.iter().enumerate().map(|(j, c)| DirSpec::new(j, c.clone())).collect();
    let est = first_derivatives_bsde(spec, &ens, noise, &adj, &dirs)?;
    let mut acc = Estimate::default();
    for (j, row) in est.iter().enumerate() {
        acc.value += row[j].value;
        acc.se += row[j].std_error;
    }
    Ok(acc)
}

/// `Φ(a)` relative to the anchor `z`.
///
/// The node integrands share the noise, so their errors are correlated; the
/// reported standard error is the weighted sum of the node standard errors.
pub fn potential_value(
    spec: &GameSpec,
    anchor: &ControlProfile,
    a: &ControlProfile,
    cfg: &PotentialConfig,
    grid: &TimeGrid,
    noise: &NoiseBundle,
) -> Result<PotentialValue> {
    check_profiles(spec, a, anchor)?;
    let (nodes, weights) = gauss_legendre(cfg.order)?;
    let diff: Vec<ScalarControl> = a
        .players
        .iter()
        .zip(&anchor.players)
        .map(|(x, y)| ScalarControl::combine(1.0, x, -1.0, y))
        .collect();
    let mut value = Estimate::default();
    let mut integrand = Vec::with_capacity(nodes.len());
    for (&r, &w) in nodes.iter().zip(&weights) {
        let u = ControlProfile::combine(1.0 - r, anchor, r, a);
        let g = gradient_pairing(spec, &u, &diff, grid, noise, &cfg.basis)?;
        value.value += w * g.value;
        value.se += w * g.se;
        integrand.push(g);
    }
    Ok(PotentialValue {
        value,
        nodes,
        weights,
        integrand,
    })
}

/// `V_i(b) − V_i(a)` for every player, pathwise under common random numbers.
pub fn cost_differences(
    spec: &GameSpec,
    a: &ControlProfile,
    b: &ControlProfile,
    grid: &TimeGrid,
    noise: &NoiseBundle,
) -> Result<Vec<Estimate>> {
    let n = spec.n_players;
    let mom = cost_pass(spec, &[a.clone(), b.clone()], grid, noise, n, |c, out| {
        for i in 0..n {
            out[i] = c[n + i] - c[i];
        }
    })?;
    Ok(mom.estimates())
}

/// Both sides of a unilateral deviation and their gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationGap {
    pub player: usize,
    pub delta_v: Estimate,
    pub delta_phi: Estimate,
    /// `|ΔV_i − ΔΦ|` with the summed standard errors.
    pub gap: Estimate,
}

/// Gap between the cost change of player `i` and the potential change when
/// `i` alone switches from `a_i` to `a_prime_i`. `phi_a` may carry a
/// precomputed `Φ(a)` to avoid re-evaluating it across deviations.
#[allow(clippy::too_many_arguments)]
pub fn potential_deviation_gap(
    spec: &GameSpec,
    a: &ControlProfile,
    i: usize,
    a_prime_i: &ScalarControl,
    anchor: &ControlProfile,
    phi_a: Option<Estimate>,
    cfg: &PotentialConfig,
    grid: &TimeGrid,
    noise: &NoiseBundle,
) -> Result<DeviationGap> {
    check_profiles(spec, a, anchor)?;
    if i >= spec.n_players {
        return Err(Error::InvalidParameters(format!("player {i} out of range")));
    }
    let b = a.with_player(i, a_prime_i.clone());
    let dv = cost_differences(spec, a, &b, grid, noise)?[i];
    let pa = match phi_a {
        Some(p) => p,
        None => potential_value(spec, anchor, a, cfg, grid, noise)?.value,
    };
    let pb = potential_value(spec, anchor, &b, cfg, grid, noise)?.value;
    let dphi = Estimate::new(pb.value - pa.value, pb.se + pa.se);
    Ok(DeviationGap {
        player: i,
        delta_v: dv,
        delta_phi: dphi,
        gap: Estimate::new((dv.value - dphi.value).abs(), dv.se + dphi.se),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for order in 1..=10 {
            let (x, w) = gauss_legendre(order).unwrap();
            for deg in 0..2 * order {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                assert!(
                    (q - 1.0 / (deg as f64 + 1.0)).abs() < 1e-13,
                    "order {order} degree {deg}"
                );
            }
        }
    }

    #[test]
    fn two_point_rule() {
        let (x, w) = gauss_legendre(2).unwrap();
        let d = 0.5 / 3f64.sqrt();
        assert!((x[0] - (0.5 - d)).abs() < 1e-15 && (x[1] - (0.5 + d)).abs() < 1e-15);
        assert!((w[0] - 0.5).abs() < 1e-15);
    }
}
