// SPDX-License-Identifier: MIT OR Apache-2.0

//! Cross-derivative asymmetry and the empirical α estimate.
//!
//! For players `i ≠ j` and dictionary directions `(u'_i, u''_j)`
//!
//! ```text
//! A_ij(u'_i, u''_j) = δ²V_i/δu_iδu_j (u; u'_i, u''_j) − δ²V_j/δu_jδu_i (u; u''_j, u'_i)
//! asym[i][j]        = max over the dictionary of |E A_ij|
//! α̂                 = 2 · max_i Σ_{j≠i} asym[i][j]
//! ```
//!
//! Both second derivatives are taken along the same pair of perturbations,
//! so each estimator evaluates `A_ij` pathwise and its standard error is that
//! of the difference, not the sum of two standard errors. α̂ is a lower
//! estimate of the supremum over all admissible controls and directions.
//!
//! Three estimators are provided:
//! - `SENS`: one streamed pass over all dictionary tangents; pair terms are
//!   cost-Hessian quadratic forms plus `∂_y f·Z` when the dynamics are not
//!   affine (then the second-order processes of every pair are propagated);
//! - `FD`: CRN mixed differences with Richardson extrapolation;
//! - `BSDE`: the second-adjoint trace formula for each player separately.

use crate::bsde::{solve_adjoint, solve_second_adjoint, RegressionBasis};
use crate::derivatives::{richardson, second_derivative_bsde, Method, EPS_SCHEDULE};
use crate::error::{Error, Result};
use crate::model::{ControlProfile, CostFirst, CostSecond, GameSpec, NoiseBundle, ScalarControl, TimeGrid};
use crate::sim::paths::cost_pass;
use crate::sim::sensitivity::{sensitivity_pass, PassVisitor, StepCtx};
use crate::sim::{DirSpec, PathEnsemble};
use crate::stats::Estimate;
use serde::{Deserialize, Serialize};

/// Asymmetry of one player pair: the dictionary maximum and every entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymmetryEntry {
    pub i: usize,
    pub j: usize,
    pub method: Method,
    /// `|E A_ij|` at the maximizing dictionary pair.
    pub value: f64,
    /// Standard error of `E A_ij` at the maximizing pair.
    pub se: f64,
    /// Maximizing `(a, b)` dictionary indices.
    pub argmax: (usize, usize),
    /// Signed `E A_ij` for every dictionary pair, row-major `[a][b]`.
    pub pairs: Vec<Estimate>,
}

impl AsymmetryEntry {
    fn from_pairs(i: usize, j: usize, method: Method, n_dict: usize, pairs: Vec<Estimate>) -> Self {
        let mut best = (0usize, 0usize);
        let mut value = -1.0;
        for (q, e) in pairs.iter().enumerate() {
            if e.value.abs() > value {
                value = e.value.abs();
                best = (q / n_dict, q % n_dict);
            }
        }
        let se = pairs[best.0 * n_dict + best.1].se;
        Self {
            i,
            j,
            method,
            value: value.max(0.0),
            se,
            argmax: best,
            pairs,
        }
    }
}

/// Symmetric asymmetry matrix with standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymmetryMatrix {
    pub n_players: usize,
    pub method: Method,
    /// Row-major N×N, zero diagonal.
    pub value: Vec<f64>,
    pub se: Vec<f64>,
    pub entries: Vec<AsymmetryEntry>,
}

impl AsymmetryMatrix {
    fn from_entries(n: usize, method: Method, entries: Vec<AsymmetryEntry>) -> Self {
        let mut value = vec![0.0; n * n];
        let mut se = vec![0.0; n * n];
        for e in &entries {
            for (r, c) in [(e.i, e.j), (e.j, e.i)] {
                value[r * n + c] = e.value;
                se[r * n + c] = e.se;
            }
        }
        Self {
            n_players: n,
            method,
            value,
            se,
            entries,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Estimate {
        let n = self.n_players;
        Estimate::new(self.value[i * n + j], self.se[i * n + j])
    }

    /// `2 · max_i Σ_{j≠i} asym[i][j]` with the standard errors of the
    /// maximizing row added (conservative).
    pub fn alpha(&self) -> Estimate {
        let n = self.n_players;
        let mut best = Estimate::default();
        for i in 0..n {
            let row: f64 = (0..n).filter(|&j| j != i).map(|j| self.value[i * n + j]).sum();
            let se: f64 = (0..n).filter(|&j| j != i).map(|j| self.se[i * n + j]).sum();
            if 2.0 * row > best.value {
                best = Estimate::new(2.0 * row, 2.0 * se);
            }
        }
        best
    }

    /// Largest entry.
    pub fn max_entry(&self) -> Option<&AsymmetryEntry> {
        self.entries.iter().max_by(|a, b| a.value.total_cmp(&b.value))
    }
}

fn check_dict(dict: &[ScalarControl]) -> Result<()> {
    if dict.is_empty() {
        return Err(Error::InvalidParameters("direction dictionary is empty".into()));
    }
    Ok(())
}

fn check_pair(spec: &GameSpec, i: usize, j: usize) -> Result<()> {
    let n = spec.n_players;
    if i >= n || j >= n {
        return Err(Error::InvalidParameters(format!(
            "players ({i}, {j}) out of range (N = {n})"
        )));
    }
    if i == j {
        return Err(Error::InvalidParameters("asymmetry needs two distinct players".into()));
    }
    Ok(())
}

/// Ordered player pairs `i < j`.
fn player_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

struct SensAsymVisitor<'a> {
    spec: &'a GameSpec,
    n_dict: usize,
    /// `(i, j)` player pairs; channels `[pp][a][b]`.
    players: Vec<(usize, usize)>,
    with_z: bool,
}

struct SensScratch {
    cs: Vec<CostSecond>,
    cf: Vec<CostFirst>,
    gxx: Vec<Vec<f64>>,
    gx: Vec<Vec<f64>>,
    /// `H_k Y_{(k,a)}` per `(k, a)`, length N each.
    w: Vec<f64>,
    /// Nonzero components of each tangent.
    support: Vec<Vec<usize>>,
}

impl SensAsymVisitor<'_> {
    #[inline]
    fn dir(&self, player: usize, a: usize) -> usize {
        player * self.n_dict + a
    }
}

fn sparse_dot(x: &[f64], y: &[f64], supp: &[usize]) -> f64 {
    supp.iter().map(|&r| x[r] * y[r]).sum()
}

impl PassVisitor for SensAsymVisitor<'_> {
    type Scratch = SensScratch;

    fn scratch(&self) -> SensScratch {
        let n = self.spec.n_players;
        SensScratch {
            cs: (0..n).map(|_| CostSecond::new(n)).collect(),
            cf: (0..n).map(|_| CostFirst::new(n)).collect(),
            gxx: vec![vec![0.0; n * n]; n],
            gx: vec![vec![0.0; n]; n],
            w: vec![0.0; n * self.n_dict * n],
            support: vec![Vec::with_capacity(n); n * self.n_dict],
        }
    }

    fn visit(&self, ctx: &StepCtx<'_>, s: &mut SensScratch, out: &mut [f64]) {
        let n = ctx.n;
        let nd = self.n_dict;
        for (d, supp) in s.support.iter_mut().enumerate() {
            supp.clear();
            supp.extend(ctx.y(d).iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(r, _)| r));
        }
        // H_k Y_{(k,a)}
        for k in 0..n {
            let hess: &[f64] = if ctx.terminal {
                self.spec.terminal.second(k, ctx.x, &mut s.gxx[k]);
                if self.with_z {
                    self.spec.terminal.first(k, ctx.x, &mut s.gx[k]);
                }
                &s.gxx[k]
            } else {
                self.spec.running.second(k, ctx.t, ctx.x, ctx.u, &mut s.cs[k]);
                if self.with_z {
                    self.spec.running.first(k, ctx.t, ctx.x, ctx.u, &mut s.cf[k]);
                }
                &s.cs[k].dyy
            };
            for a in 0..nd {
                let d = self.dir(k, a);
                let y = ctx.y(d);
                let w = &mut s.w[d * n..(d + 1) * n];
                for (r, wr) in w.iter_mut().enumerate() {
                    *wr = sparse_dot(&hess[r * n..(r + 1) * n], y, &s.support[d]);
                }
            }
        }
        let weight = if ctx.terminal { 1.0 } else { ctx.dt };
        for (pp, &(i, j)) in self.players.iter().enumerate() {
            for a in 0..nd {
                let di = self.dir(i, a);
                for b in 0..nd {
                    let dj = self.dir(j, b);
                    let (yi, yj) = (ctx.y(di), ctx.y(dj));
                    // state-state blocks: Y_iᵀH_iY_j and Y_iᵀH_jY_j
                    let mut vi = sparse_dot(&s.w[di * n..(di + 1) * n], yj, &s.support[dj]);
                    let mut vj = sparse_dot(&s.w[dj * n..(dj + 1) * n], yi, &s.support[di]);
                    if !ctx.terminal {
                        let (ai, aj) = (ctx.a[di], ctx.a[dj]);
                        // control terms of the quadratic (state-state part already added)
                        vi += cost_quadratic_controls(&s.cs[i], n, i, j, ai, aj, yi, yj);
                        vj += cost_quadratic_controls(&s.cs[j], n, i, j, ai, aj, yi, yj);
                    }
                    if self.with_z {
                        let q = (pp * nd + a) * nd + b;
                        let z = ctx.z(q);
                        let (gi, gj): (&[f64], &[f64]) = if ctx.terminal {
                            (&s.gx[i], &s.gx[j])
                        } else {
                            (&s.cf[i].dy, &s.cf[j].dy)
                        };
                        vi += gi.iter().zip(z).map(|(g, z)| g * z).sum::<f64>();
                        vj += gj.iter().zip(z).map(|(g, z)| g * z).sum::<f64>();
                    }
                    out[(pp * nd + a) * nd + b] += weight * (vi - vj);
                }
            }
        }
    }
}

/// Control-dependent part of the cost quadratic form (everything but the
/// state-state block).
#[inline]
#[allow(clippy::too_many_arguments)]
fn cost_quadratic_controls(
    cs: &CostSecond,
    n: usize,
    h: usize,
    l: usize,
    a: f64,
    c: f64,
    yh: &[f64],
    yl: &[f64],
) -> f64 {
    let mut v = 0.0;
    for r in 0..n {
        v += a * cs.dyu[r * n + h] * yl[r] + c * yh[r] * cs.dyu[r * n + l];
    }
    v + cs.duu[h * n + l] * a * c
}

/// Asymmetry matrix from the sensitivity route in one streamed pass.
pub fn asymmetry_sens(
    spec: &GameSpec,
    ens: &PathEnsemble,
    noise: &NoiseBundle,
    dict: &[ScalarControl],
) -> Result<AsymmetryMatrix> {
    check_dict(dict)?;
    let n = spec.n_players;
    let nd = dict.len();
    let dirs: Vec<DirSpec> = (0..n)
        .flat_map(|k| dict.iter().map(move |c| DirSpec::new(k, c.clone())))
        .collect();
    let players = player_pairs(n);
    let with_z = !spec.dynamics_affine();
    let zpairs: Vec<(usize, usize)> = if with_z {
        players
            .iter()
            .flat_map(|&(i, j)| (0..nd).flat_map(move |a| (0..nd).map(move |b| (i * nd + a, j * nd + b))))
            .collect()
    } else {
        Vec::new()
    };
    let n_out = players.len() * nd * nd;
    let v = SensAsymVisitor {
        spec,
        n_dict: nd,
        players: players.clone(),
        with_z,
    };
    let out = sensitivity_pass(spec, ens, noise, &dirs, &zpairs, n_out, &v, false)?;
    let est = out.moments.estimates();
    let entries = players
        .iter()
        .enumerate()
        .map(|(pp, &(i, j))| {
            AsymmetryEntry::from_pairs(i, j, Method::Sens, nd, est[pp * nd * nd..(pp + 1) * nd * nd].to_vec())
        })
        .collect();
    Ok(AsymmetryMatrix::from_entries(n, Method::Sens, entries))
}

/// Signed `E A_ij(u'_i, u''_j)` by CRN mixed differences with Richardson
/// extrapolation; the difference is formed pathwise.
#[allow(clippy::too_many_arguments)]
pub fn asymmetry_pair_fd(
    spec: &GameSpec,
    controls: &ControlProfile,
    i: usize,
    j: usize,
    dir_i: &ScalarControl,
    dir_j: &ScalarControl,
    grid: &TimeGrid,
    noise: &NoiseBundle,
) -> Result<Estimate> {
    check_pair(spec, i, j)?;
    let n = spec.n_players;
    let mut profiles = Vec::with_capacity(4 * EPS_SCHEDULE.len());
    for &e in &EPS_SCHEDULE {
        for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            profiles.push(controls.perturbed(i, si * e, dir_i).perturbed(j, sj * e, dir_j));
        }
    }
    let mom = cost_pass(spec, &profiles, grid, noise, 1, |c, out| {
        let mut d = [0.0; 3];
        for (s, &e) in EPS_SCHEDULE.iter().enumerate() {
            let v = |q: usize, k: usize| c[(4 * s + q) * n + k];
            let mixed = |k: usize| (v(0, k) - v(1, k) - v(2, k) + v(3, k)) / (4.0 * e * e);
            d[s] = mixed(i) - mixed(j);
        }
        out[0] = richardson(d[1], d[2]);
    })?;
    Ok(mom.estimates()[0])
}

/// Asymmetry of one player pair by finite differences (spec-level operation).
#[allow(clippy::too_many_arguments)]
pub fn asymmetry_fd(
    spec: &GameSpec,
    controls: &ControlProfile,
    i: usize,
    j: usize,
    dict: &[ScalarControl],
    grid: &TimeGrid,
    noise: &NoiseBundle,
) -> Result<AsymmetryEntry> {
    check_pair(spec, i, j)?;
    check_dict(dict)?;
    let mut pairs = Vec::with_capacity(dict.len() * dict.len());
    for a in dict {
        for b in dict {
            pairs.push(asymmetry_pair_fd(spec, controls, i, j, a, b, grid, noise)?);
        }
    }
    let (lo, hi) = (i.min(j), i.max(j));
    let pairs = if i < j {
        pairs
    } else {
        transpose_negate(&pairs, dict.len())
    };
    Ok(AsymmetryEntry::from_pairs(lo, hi, Method::Fd, dict.len(), pairs))
}

/// Re-express `A_ji` entries as `A_ij`: `A_ij(a, b) = −A_ji(b, a)`.
fn transpose_negate(p: &[Estimate], nd: usize) -> Vec<Estimate> {
    (0..nd * nd)
        .map(|q| {
            let e = p[(q % nd) * nd + q / nd];
            Estimate::new(-e.value, e.se)
        })
        .collect()
}

/// Asymmetry of one player pair through the second-adjoint trace formula.
///
/// The two second derivatives come from different adjoint solutions, so the
/// standard error is the sum of the two.
#[allow(clippy::too_many_arguments)]
pub fn asymmetry_bsde(
    spec: &GameSpec,
    ens: &PathEnsemble,
    noise: &NoiseBundle,
    i: usize,
    j: usize,
    dict: &[ScalarControl],
    basis: &RegressionBasis,
) -> Result<AsymmetryEntry> {
    check_pair(spec, i, j)?;
    check_dict(dict)?;
    let (i, j) = (i.min(j), i.max(j));
    let first = solve_adjoint(spec, ens, noise, basis)?;
    let si = solve_second_adjoint(spec, &first, i, ens, noise, basis)?;
    let sj = solve_second_adjoint(spec, &first, j, ens, noise, basis)?;
    let mut pairs = Vec::with_capacity(dict.len() * dict.len());
    for a in dict {
        for b in dict {
            let (da, db) = (DirSpec::new(i, a.clone()), DirSpec::new(j, b.clone()));
            let vi = second_derivative_bsde(spec, ens, noise, &first, &si, &da, &db, true)?;
            let vj = second_derivative_bsde(spec, ens, noise, &first, &sj, &da, &db, true)?;
            pairs.push(Estimate::new(vi.value - vj.value, vi.std_error + vj.std_error));
        }
    }
    Ok(AsymmetryEntry::from_pairs(i, j, Method::Bsde, dict.len(), pairs))
}

/// Dispatch on the method tag (`FD`, `SENS` or `BSDE`) for one player pair.
#[allow(clippy::too_many_arguments)]
pub fn asymmetry(
    spec: &GameSpec,
    controls: &ControlProfile,
    i: usize,
    j: usize,
    dict: &[ScalarControl],
    grid: &TimeGrid,
    noise: &NoiseBundle,
    method: Method,
) -> Result<AsymmetryEntry> {
    check_pair(spec, i, j)?;
    match method {
        Method::Fd => asymmetry_fd(spec, controls, i, j, dict, grid, noise),
        Method::Bsde => {
            let ens = crate::sim::simulate_paths(spec, controls, grid, noise)?;
            asymmetry_bsde(spec, &ens, noise, i, j, dict, &RegressionBasis::default())
        }
        Method::Sens => {
            let ens = crate::sim::simulate_paths(spec, controls, grid, noise)?;
            let m = asymmetry_sens(spec, &ens, noise, dict)?;
            let (lo, hi) = (i.min(j), i.max(j));
            Ok(m.entries
                .into_iter()
                .find(|e| e.i == lo && e.j == hi)
                .expect("pair present"))
        }
        Method::ZOracle => Err(Error::InvalidParameters(
            "asymmetry supports the FD, SENS and BSDE methods".into(),
        )),
    }
}
