// SPDX-License-Identifier: MIT OR Apache-2.0

//! First- and second-order sensitivity processes on a stored ensemble.
//!
//! For a perturbation `u'` of player `h` the tangent process obeys
//!
//! ```text
//! Y_{k+1} = Y_k + (B0 Y_k + e_h ∂_u b_h u'_k) dt + Σ_j e_j (π_j·Y_k + δ_{jh} ∂_u σ_h u'_k) ΔW^j_k
//! ```
//!
//! and for a second perturbation `u''` of player `ℓ ≠ h`
//!
//! ```text
//! Z_{k+1,m} = Z_{k,m} + [(B0 Z_k)_m + S^b_m] dt + [π_m·Z_k + S^σ_m] ΔW^m_k
//! S^φ_m = Y_hᵀ H^φ_m Y_ℓ + δ_{mh} u'_k M^φ_m(Y_ℓ) + δ_{mℓ} u''_k M^φ_m(Y_h)
//! M^φ_m(v) = v_m ∂_xu φ_m + Σ_q ∂_{u y_q} φ_m v_q
//! ```
//!
//! Both recursions are the exact derivatives of the Euler state recursion.
//! The engine [`sensitivity_pass`] streams over paths, advancing any number of
//! tangent and second-order processes together and handing every node to a
//! visitor that writes per-path outputs; nothing path-sized is stored unless
//! requested.

use crate::error::{Error, Result};
use crate::model::{ControlProfile, GameSpec, NoiseBundle, ScalarControl};
use crate::sim::paths::PathEnsemble;
use crate::sim::variational::{state_control_mixed, state_hess_bilinear, VariationalCoefficients};
use crate::stats::{par_chunks, MomentVec};

/// A perturbation direction attached to one player.
#[derive(Debug, Clone, PartialEq)]
pub struct DirSpec {
    pub player: usize,
    pub control: ScalarControl,
}

impl DirSpec {
    pub fn new(player: usize, control: ScalarControl) -> Self {
        Self { player, control }
    }
}

/// Everything a visitor sees at node `k` of path `p`.
pub struct StepCtx<'a> {
    pub p: usize,
    pub k: usize,
    pub t: f64,
    pub dt: f64,
    /// True at the terminal node `k = M` (no coefficients, no increments).
    pub terminal: bool,
    pub x: &'a [f64],
    pub u: &'a [f64],
    /// State at node `k + 1` (absent at the terminal node).
    pub x_next: Option<&'a [f64]>,
    /// Increments over step `k` (absent at the terminal node).
    pub dw: Option<&'a [f64]>,
    /// Variational coefficients at `(t_k, X_k, u_k)`; stale at the terminal node.
    pub var: &'a VariationalCoefficients,
    /// Tangent processes, `[dir][component]`.
    pub ys: &'a [f64],
    /// Second-order processes, `[pair][component]`.
    pub zs: &'a [f64],
    /// Direction values `u'_k` per dir.
    pub a: &'a [f64],
    pub n: usize,
}

impl<'a> StepCtx<'a> {
    #[inline]
    pub fn y(&self, d: usize) -> &[f64] {
        &self.ys[d * self.n..(d + 1) * self.n]
    }

    #[inline]
    pub fn z(&self, q: usize) -> &[f64] {
        &self.zs[q * self.n..(q + 1) * self.n]
    }
}

/// Per-node callback of [`sensitivity_pass`].
pub trait PassVisitor: Sync {
    type Scratch;
    fn scratch(&self) -> Self::Scratch;
    /// Add this node's contribution to the per-path outputs `out`.
    fn visit(&self, ctx: &StepCtx<'_>, scratch: &mut Self::Scratch, out: &mut [f64]);
    /// Whether coefficient second partials are needed at every node.
    fn needs_second(&self) -> bool {
        false
    }
}

/// Result of a pass: running moments of every output channel and, when
/// requested, the per-path output rows.
#[derive(Debug, Clone)]
pub struct PassOutput {
    pub n_out: usize,
    pub moments: MomentVec,
    /// `[path][channel]` when collected.
    pub rows: Option<Vec<f64>>,
}

impl PassOutput {
    /// Samples of channel `c` (requires collected rows).
    pub fn channel(&self, c: usize) -> Vec<f64> {
        let rows = self.rows.as_ref().expect("rows were not collected");
        rows.iter().skip(c).step_by(self.n_out).copied().collect()
    }
}

/// Stream over paths advancing tangent processes for `dirs` and second-order
/// processes for `pairs` (indices into `dirs`, players must differ).
#[allow(clippy::too_many_arguments)]
pub fn sensitivity_pass<V: PassVisitor>(
    spec: &GameSpec,
    ens: &PathEnsemble,
    noise: &NoiseBundle,
    dirs: &[DirSpec],
    pairs: &[(usize, usize)],
    n_out: usize,
    visitor: &V,
    collect_rows: bool,
) -> Result<PassOutput> {
    ens.check_noise(noise)?;
    let n = spec.n_players;
    for d in dirs {
        if d.player >= n {
            return Err(Error::InvalidParameters(format!(
                "direction player {} out of range",
                d.player
            )));
        }
    }
    for &(a, b) in pairs {
        if dirs[a].player == dirs[b].player {
            return Err(Error::InvalidParameters(
                "second-order sensitivity needs two distinct players (h ≠ ℓ)".into(),
            ));
        }
    }
    let grid = ens.grid;
    let m = grid.n_steps;
    let dt = grid.dt;
    let nd = dirs.len();
    let np = pairs.len();
    let tabs: Vec<Vec<f64>> = dirs.iter().map(|d| d.control.tabulate(&grid)).collect();
    let z_active = np > 0 && !spec.dynamics_affine();
    let need_second = z_active || visitor.needs_second();
    let parts = par_chunks(ens.n_paths, |range| {
        let mut var = VariationalCoefficients::new(n);
        let mut scratch = visitor.scratch();
        let mut ys = vec![0.0; nd * n];
        let mut yn = vec![0.0; nd * n];
        let mut zs = vec![0.0; np * n];
        let mut zn = vec![0.0; np * n];
        let mut a = vec![0.0; nd];
        let mut tmp = vec![0.0; n];
        let mut sb = vec![0.0; n];
        let mut ss = vec![0.0; n];
        let mut out = vec![0.0; n_out];
        let mut acc = MomentVec::zeros(n_out);
        let mut rows = if collect_rows {
            Vec::with_capacity(range.len() * n_out)
        } else {
            Vec::new()
        };
        for p in range {
            ys.fill(0.0);
            zs.fill(0.0);
            out.fill(0.0);
            for k in 0..=m {
                let terminal = k == m;
                let x = ens.x(p, k);
                let u = ens.u(p, k);
                let t = grid.t(k);
                for (dd, tab) in tabs.iter().enumerate() {
                    a[dd] = tab[k];
                }
                if !terminal {
                    var.fill(spec, t, x, u, need_second);
                }
                let dw = if terminal { None } else { Some(noise.dw(p, k)) };
                let ctx = StepCtx {
                    p,
                    k,
                    t,
                    dt,
                    terminal,
                    x,
                    u,
                    x_next: if terminal { None } else { Some(ens.x(p, k + 1)) },
                    dw,
                    var: &var,
                    ys: &ys,
                    zs: &zs,
                    a: &a,
                    n,
                };
                visitor.visit(&ctx, &mut scratch, &mut out);
                if terminal {
                    break;
                }
                let dw = dw.unwrap();
                // tangent processes
                for dd in 0..nd {
                    let y = &ys[dd * n..(dd + 1) * n];
                    let h = dirs[dd].player;
                    var.b0_mul(y, &mut tmp);
                    let yo = &mut yn[dd * n..(dd + 1) * n];
                    for q in 0..n {
                        let mut diff = var.pi_dot(q, y);
                        let mut drift = tmp[q];
                        if q == h {
                            drift += var.b1u[h] * a[dd];
                            diff += var.pi1u[h] * a[dd];
                        }
                        yo[q] = y[q] + drift * dt + diff * dw[q];
                    }
                }
                // second-order processes
                if z_active {
                    for (qq, &(d1, d2)) in pairs.iter().enumerate() {
                        let yh = &ys[d1 * n..(d1 + 1) * n];
                        let yl = &ys[d2 * n..(d2 + 1) * n];
                        let (h, l) = (dirs[d1].player, dirs[d2].player);
                        for mm in 0..n {
                            let mut vb = state_hess_bilinear(mm, &var.b2[mm], yh, yl);
                            let mut vs = state_hess_bilinear(mm, &var.s2[mm], yh, yl);
                            if mm == h {
                                vb += a[d1] * state_control_mixed(mm, &var.b2[mm], yl);
                                vs += a[d1] * state_control_mixed(mm, &var.s2[mm], yl);
                            }
                            if mm == l {
                                vb += a[d2] * state_control_mixed(mm, &var.b2[mm], yh);
                                vs += a[d2] * state_control_mixed(mm, &var.s2[mm], yh);
                            }
                            sb[mm] = vb;
                            ss[mm] = vs;
                        }
                        let z = &zs[qq * n..(qq + 1) * n];
                        var.b0_mul(z, &mut tmp);
                        let zo = &mut zn[qq * n..(qq + 1) * n];
                        for q in 0..n {
                            zo[q] = z[q] + (tmp[q] + sb[q]) * dt + (var.pi_dot(q, z) + ss[q]) * dw[q];
                        }
                    }
                    std::mem::swap(&mut zs, &mut zn);
                }
                std::mem::swap(&mut ys, &mut yn);
            }
            acc.push_row(&out);
            if collect_rows {
                rows.extend_from_slice(&out);
            }
        }
        (acc, rows)
    });
    let mut moments = MomentVec::zeros(n_out);
    let mut rows = if collect_rows {
        Some(Vec::with_capacity(ens.n_paths * n_out))
    } else {
        None
    };
    for (acc, r) in parts {
        moments.merge(&acc);
        if let Some(all) = rows.as_mut() {
            all.extend_from_slice(&r);
        }
    }
    Ok(PassOutput { n_out, moments, rows })
}

/// Tangent process `Y^{u,u'_h}` on every node.
#[derive(Debug, Clone)]
pub struct SensitivityEnsemble {
    pub perturbed_player: usize,
    pub direction: ScalarControl,
    pub n_players: usize,
    pub n_steps: usize,
    pub seed: u64,
    /// `[path][node][component]`
    pub values: Vec<f64>,
}

impl SensitivityEnsemble {
    #[inline]
    pub fn y(&self, p: usize, k: usize) -> &[f64] {
        let n = self.n_players;
        let off = (p * (self.n_steps + 1) + k) * n;
        &self.values[off..off + n]
    }
}

/// Second-order process `Z^{u,u'_h,u''_ℓ}` on every node.
#[derive(Debug, Clone)]
pub struct SecondSensitivityEnsemble {
    pub pair: (usize, usize),
    pub directions: (ScalarControl, ScalarControl),
    pub n_players: usize,
    pub n_steps: usize,
    /// `[path][node][component]`
    pub values: Vec<f64>,
}

impl SecondSensitivityEnsemble {
    #[inline]
    pub fn z(&self, p: usize, k: usize) -> &[f64] {
        let n = self.n_players;
        let off = (p * (self.n_steps + 1) + k) * n;
        &self.values[off..off + n]
    }
}

struct Recorder {
    which: Which,
}

enum Which {
    Y(usize),
    Z(usize),
}

impl PassVisitor for Recorder {
    type Scratch = ();
    fn scratch(&self) {}
    fn visit(&self, ctx: &StepCtx<'_>, _: &mut (), out: &mut [f64]) {
        let n = ctx.n;
        let src = match self.which {
            Which::Y(d) => ctx.y(d),
            Which::Z(q) => ctx.z(q),
        };
        out[ctx.k * n..(ctx.k + 1) * n].copy_from_slice(src);
    }
}

/// Materialize the tangent process of player `h` along `direction`.
pub fn propagate_sensitivity(
    spec: &GameSpec,
    _controls: &ControlProfile,
    ens: &PathEnsemble,
    h: usize,
    direction: &ScalarControl,
    noise: &NoiseBundle,
) -> Result<SensitivityEnsemble> {
    let n = spec.n_players;
    let m = ens.grid.n_steps;
    let dirs = [DirSpec::new(h, direction.clone())];
    let out = sensitivity_pass(
        spec,
        ens,
        noise,
        &dirs,
        &[],
        (m + 1) * n,
        &Recorder { which: Which::Y(0) },
        true,
    )?;
    Ok(SensitivityEnsemble {
        perturbed_player: h,
        direction: direction.clone(),
        n_players: n,
        n_steps: m,
        seed: ens.seed,
        values: out.rows.unwrap(),
    })
}

/// Materialize the second-order process for the two tangent processes.
pub fn propagate_second_sensitivity(
    spec: &GameSpec,
    _controls: &ControlProfile,
    ens: &PathEnsemble,
    y_h: &SensitivityEnsemble,
    y_l: &SensitivityEnsemble,
    noise: &NoiseBundle,
) -> Result<SecondSensitivityEnsemble> {
    if y_h.perturbed_player == y_l.perturbed_player {
        return Err(Error::InvalidParameters(
            "second-order sensitivity needs two distinct players (h ≠ ℓ)".into(),
        ));
    }
    if y_h.seed != ens.seed
        || y_l.seed != ens.seed
        || y_h.n_steps != ens.grid.n_steps
        || y_l.n_steps != ens.grid.n_steps
    {
        return Err(Error::Mismatch(
            "sensitivity ensembles were built on another ensemble".into(),
        ));
    }
    let n = spec.n_players;
    let m = ens.grid.n_steps;
    let dirs = [
        DirSpec::new(y_h.perturbed_player, y_h.direction.clone()),
        DirSpec::new(y_l.perturbed_player, y_l.direction.clone()),
    ];
    let out = sensitivity_pass(
        spec,
        ens,
        noise,
        &dirs,
        &[(0, 1)],
        (m + 1) * n,
        &Recorder { which: Which::Z(0) },
        true,
    )?;
    Ok(SecondSensitivityEnsemble {
        pair: (y_h.perturbed_player, y_l.perturbed_player),
        directions: (y_h.direction.clone(), y_l.direction.clone()),
        n_players: n,
        n_steps: m,
        values: out.rows.unwrap(),
    })
}
