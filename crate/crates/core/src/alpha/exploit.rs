// SPDX-License-Identifier: MIT OR Apache-2.0

//! Exploitability of a profile and a parametric minimizer of the potential.
//!
//! Exploitability over a deviation dictionary `𝒟` (directions `d`, scales `s`):
//!
//! ```text
//! expl_i(a) = max_{d ∈ 𝒟, s} ( V_i(a) − V_i(a_i + s·d, a_{−i}) )₊
//! expl(a)   = max_i expl_i(a)
//! ```
//!
//! Every player uses a control in the linear family `u_i = Σ_k θ_{i,k} d_k`.
//! The own-gradient field
//!
//! ```text
//! g_{(i,k)}(θ) = δV_i/δu_i (u_θ; d_k)
//! ```
//!
//! is the gradient of `Φ(u_θ)` in a potential game. The minimizer takes
//! Newton steps `θ ← θ − H⁻¹ g(θ)`, where `H` is the symmetrized Jacobian of
//! `g`, obtained from unit-step differences under common random numbers. With
//! affine dynamics and quadratic costs `g` is affine in `θ`. The differences
//! are then exact, and a single step lands on the stationary point of the
//! empirical potential.
//!
//! The optimization slack over the deviation dictionary uses the same
//! quadratic model:
//!
//! ```text
//! ε_opt = max_{(i,k), s} ( −[ s·g_{(i,k)}(θ*) + ½ s² H_{(i,k),(i,k)} ] )₊
//! ```
//!
//! By the α-potential property, the minimizer is then an `(α + ε_opt)`-Nash
//! equilibrium on the dictionary.

use crate::derivatives::first_derivatives_sens;
use crate::error::{Error, Result};
use crate::model::controls::dictionary_control;
use crate::model::{ControlProfile, GameSpec, NoiseBundle, ScalarControl, TimeGrid};
use crate::sim::paths::cost_pass;
use crate::sim::{simulate_paths, DirSpec};
use crate::stats::Estimate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// One unilateral deviation `a_i → a_i + scale·direction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub player: usize,
    pub direction: usize,
    pub scale: f64,
    /// `V_i(a) − V_i(a')`; positive means the deviation pays off.
    pub improvement: Estimate,
}

/// Exploitability of a profile over a deviation dictionary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exploitability {
    /// `(max improvement)₊` per player, with the SE of the maximizing deviation.
    pub per_player: Vec<Estimate>,
    pub value: Estimate,
    pub deviations: Vec<Deviation>,
}

/// Exploitability of `a` over deviations `a_i + s·d` for every player,
/// direction `d` and scale `s`, estimated pathwise under common random numbers.
pub fn exploitability(
    spec: &GameSpec,
    a: &ControlProfile,
    directions: &[ScalarControl],
    scales: &[f64],
    grid: &TimeGrid,
    noise: &NoiseBundle,
) -> Result<Exploitability> {
    let n = spec.n_players;
    if a.n_players() != n {
        return Err(Error::Mismatch(format!(
            "profile has {} players, game has {n}",
            a.n_players()
        )));
    }
    if directions.is_empty() || scales.is_empty() {
        return Err(Error::InvalidParameters("deviation dictionary is empty".into()));
    }
    let mut profiles = vec![a.clone()];
    let mut index = Vec::new();
    for i in 0..n {
        for (k, d) in directions.iter().enumerate() {
            for &s in scales {
                profiles.push(a.perturbed(i, s, d));
                index.push((i, k, s));
            }
        }
    }
    let m = index.len();
    let est = cost_pass(spec, &profiles, grid, noise, m, |c, out| {
        for (q, &(i, _, _)) in index.iter().enumerate() {
            out[q] = c[i] - c[(q + 1) * n + i];
        }
    })?
    .estimates();
    let deviations: Vec<Deviation> = index
        .iter()
        .zip(&est)
        .map(|(&(player, direction, scale), &improvement)| Deviation {
            player,
            direction,
            scale,
            improvement,
        })
        .collect();
    let mut per_player = vec![Estimate::new(f64::NEG_INFINITY, 0.0); n];
    for d in &deviations {
        let best = &mut per_player[d.player];
        if d.improvement.value > best.value {
            *best = d.improvement;
        }
    }
    for e in &mut per_player {
        e.value = e.value.max(0.0);
    }
    let value = per_player.iter().copied().fold(Estimate::new(0.0, 0.0), |acc, e| {
        if e.value > acc.value || (e.value == acc.value && e.se > acc.se) {
            e
        } else {
            acc
        }
    });
    Ok(Exploitability {
        per_player,
        value,
        deviations,
    })
}

/// The profile `u_i = Σ_k θ_{i,k} d_k` with `θ` stored player-major.
pub fn family_profile(theta: &[f64], directions: &[ScalarControl], n: usize) -> ControlProfile {
    let nd = directions.len();
    ControlProfile::new(
        (0..n)
            .map(|i| {
                let mut u = ScalarControl::zero();
                for (k, d) in directions.iter().enumerate() {
                    let c = theta[i * nd + k];
                    if c != 0.0 {
                        u = u.plus(&d.scaled(c));
                    }
                }
                u
            })
            .collect(),
    )
}

/// Own-gradient field `g_{(i,k)}(θ)` by the pathwise sensitivity route.
pub fn own_gradient(
    spec: &GameSpec,
    theta: &[f64],
    directions: &[ScalarControl],
    grid: &TimeGrid,
    noise: &NoiseBundle,
) -> Result<Vec<Estimate>> {
    let n = spec.n_players;
    let nd = directions.len();
    if theta.len() != n * nd {
        return Err(Error::Mismatch(format!(
            "θ has {} entries, expected {}",
            theta.len(),
            n * nd
        )));
    }
    let u = family_profile(theta, directions, n);
    let ens = simulate_paths(spec, &u, grid, noise)?;
    let dirs: Vec<DirSpec> = (0..n)
        .flat_map(|i| directions.iter().map(move |d| DirSpec::new(i, d.clone())))
        .collect();
    let est = first_derivatives_sens(spec, &ens, noise, &dirs)?;
    Ok(dirs
        .iter()
        .enumerate()
        .map(|(q, ds)| Estimate::new(est[q][ds.player].value, est[q][ds.player].std_error))
        .collect())
}

/// Settings of [`minimize_potential`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizerConfig {
    pub max_iter: usize,
    /// Stop when `max |g(θ)|` falls below this value.
    pub tol: f64,
}

impl Default for MinimizerConfig {
    fn default() -> Self {
        Self {
            max_iter: 4,
            tol: 1e-10,
        }
    }
}

/// Outcome of [`minimize_potential`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialMinimizer {
    /// Player-major coefficients `θ_{i,k}`.
    pub theta: Vec<f64>,
    pub iterations: usize,
    /// Own gradient at the returned `θ`.
    pub gradient: Vec<Estimate>,
    /// Symmetrized Jacobian of the own gradient, row-major.
    pub hessian: Vec<f64>,
    /// Largest `|J − Jᵀ|` entry before symmetrization.
    pub jacobian_asymmetry: f64,
}

impl PotentialMinimizer {
    pub fn profile(&self, directions: &[ScalarControl], n: usize) -> ControlProfile {
        family_profile(&self.theta, directions, n)
    }
}

/// Newton minimization of the potential over the linear control family.
pub fn minimize_potential(
    spec: &GameSpec,
    directions: &[ScalarControl],
    cfg: &MinimizerConfig,
    grid: &TimeGrid,
    noise: &NoiseBundle,
) -> Result<PotentialMinimizer> {
    let n = spec.n_players;
    let dim = n * directions.len();
    if dim == 0 {
        return Err(Error::InvalidParameters("empty control family".into()));
    }
    let mut theta = vec![0.0; dim];
    let mut iterations = 0;
    let mut g = own_gradient(spec, &theta, directions, grid, noise)?;
    loop {
        let (h, jac_asym) = symmetrized_jacobian(spec, &theta, &g, directions, grid, noise)?;
        let gmax = g.iter().fold(0.0f64, |m, e| m.max(e.value.abs()));
        if gmax <= cfg.tol || iterations >= cfg.max_iter {
            return Ok(PotentialMinimizer {
                theta,
                iterations,
                gradient: g,
                hessian: (0..dim * dim).map(|q| h[(q / dim, q % dim)]).collect(),
                jacobian_asymmetry: jac_asym,
            });
        }
        let rhs = DVector::from_iterator(dim, g.iter().map(|e| e.value));
        let step = h.cholesky().map(|ch| ch.solve(&rhs)).ok_or_else(|| {
            Error::InvalidParameters("potential Hessian on the control family is not positive definite".into())
        })?;
        for (t, s) in theta.iter_mut().zip(step.iter()) {
            *t -= s;
        }
        iterations += 1;
        g = own_gradient(spec, &theta, directions, grid, noise)?;
    }
}

/// Jacobian of the own gradient by unit steps, symmetrized, with its largest
/// asymmetry.
fn symmetrized_jacobian(
    spec: &GameSpec,
    theta: &[f64],
    g: &[Estimate],
    directions: &[ScalarControl],
    grid: &TimeGrid,
    noise: &NoiseBundle,
) -> Result<(DMatrix<f64>, f64)> {
    let dim = theta.len();
    let mut jac = DMatrix::<f64>::zeros(dim, dim);
    for c in 0..dim {
        let mut th = theta.to_vec();
        th[c] += 1.0;
        let gc = own_gradient(spec, &th, directions, grid, noise)?;
        for r in 0..dim {
            jac[(r, c)] = gc[r].value - g[r].value;
        }
    }
    let mut asym = 0.0f64;
    for r in 0..dim {
        for c in 0..dim {
            asym = asym.max((jac[(r, c)] - jac[(c, r)]).abs());
        }
    }
    Ok(((&jac + jac.transpose()) * 0.5, asym))
}
/// `ε_opt` of a profile against deviations `a_i + s·d`, from the quadratic
/// model `ΔΦ ≈ s·g + ½ s²·h` with `g = δV_i/δu_i(a; d)` and
/// `h = δV_i/δu_i(a + e_i d; d) − g`. The model is exact when the own
/// gradient is affine, and it covers directions outside the control family.
pub fn optimization_slack(
    spec: &GameSpec,
    a: &ControlProfile,
    directions: &[ScalarControl],
    scales: &[f64],
    grid: &TimeGrid,
    noise: &NoiseBundle,
) -> Result<f64> {
    let n = spec.n_players;
    let grad = |u: &ControlProfile, i: usize, d: &ScalarControl| -> Result<f64> {
        let ens = simulate_paths(spec, u, grid, noise)?;
        let est = first_derivatives_sens(spec, &ens, noise, &[DirSpec::new(i, d.clone())])?;
        Ok(est[0][i].value)
    };
    let ens = simulate_paths(spec, a, grid, noise)?;
    let dirs: Vec<DirSpec> = (0..n)
        .flat_map(|i| directions.iter().map(move |d| DirSpec::new(i, d.clone())))
        .collect();
    let g0 = first_derivatives_sens(spec, &ens, noise, &dirs)?;
    let mut eps = 0.0f64;
    for (q, ds) in dirs.iter().enumerate() {
        let g = g0[q][ds.player].value;
        let h = grad(&a.perturbed(ds.player, 1.0, &ds.control), ds.player, &ds.control)? - g;
        for &s in scales {
            eps = eps.max(-(s * g + 0.5 * s * s * h));
        }
    }
    Ok(eps)
}

/// The three-term family `θ₀ + θ₁ t/T + θ₂ sin(2πt/T)`.
pub fn three_term_family() -> Vec<ScalarControl> {
    (0..3)
        .map(|k| {
            let mut c = [0.0; 3];
            c[k] = 1.0;
            dictionary_control(&c)
        })
        .collect()
}
