// SPDX-License-Identifier: MIT OR Apache-2.0

//! Reusable experiments behind the subcommands and the acceptance checks.
//!
//! Each function returns serializable rows. Pass/fail tolerances are applied
//! by the caller, except the three-way derivative tables, which carry their
//! own tolerance columns:
//!
//! ```text
//! first order:   |A − B| ≤ 3 (SE_A + SE_B) + 10 ε_min
//! second order:  |A − B| ≤ 5 (SE_A + SE_B) + 20 ε_min
//! ```

use crate::alpha::bounds::{moment_bound_constants, sensitivity_moment_bound};
use crate::alpha::{
    cost_differences, empirical_asymmetry, exploitability, minimize_potential, optimization_slack, potential_value,
    theoretical_alpha_bound, three_term_family, AlphaBound, AsymmetryMatrix, BoundLedger, MinimizerConfig,
    PotentialConfig,
};
use crate::bsde::{
    apriori_bound_check, solve_adjoint, solve_linear_bsde, solve_second_adjoint, trace_duality_residual, AprioriReport,
    LinearBsde, MatrixLinearBsde, OuterProductProcess, RegressionBasis, SecondAdjointProcess, TraceDualityReport,
};
use crate::derivatives::{
    first_derivatives_bsde, first_derivatives_fd, first_derivatives_sens, second_derivative_bsde,
    second_derivative_z_oracle, second_derivatives_fd, EPS_MIN,
};
use crate::error::{Error, Result};
use crate::model::{ConstantLedger, ControlProfile, Direction, GameSpec, NoiseBundle, ScalarControl, TimeGrid};
use crate::sim::{empirical_moment, propagate_sensitivity, sensitivity_moment, simulate_paths, DirSpec};
use crate::stats::{log_log_slope, par_chunks, Estimate};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Absolute slack of the first-order agreement test.
pub const FIRST_SLACK: f64 = 10.0 * EPS_MIN;
/// Absolute slack of the second-order agreement test.
pub const SECOND_SLACK: f64 = 20.0 * EPS_MIN;

fn est(d: &crate::derivatives::DerivativeEstimate) -> Estimate {
    Estimate::new(d.value, d.std_error)
}

fn within(a: Estimate, b: Estimate, k: f64, slack: f64) -> (f64, f64, bool) {
    let gap = (a.value - b.value).abs();
    let tol = k * (a.se + b.se) + slack;
    (gap, tol, gap <= tol)
}

/// One row of the first-order three-way table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstRow {
    pub player: usize,
    pub perturbed: usize,
    pub direction: Direction,
    pub fd: Estimate,
    pub sens: Estimate,
    pub bsde: Estimate,
    pub gap_sens: f64,
    pub tol_sens: f64,
    pub gap_bsde: f64,
    pub tol_bsde: f64,
    pub ok: bool,
}

/// `δV_i/δu_h` for every `(i, h)` and direction by FD, SENS and BSDE.
pub fn first_agreement(
    spec: &GameSpec,
    controls: &ControlProfile,
    dirs: &[Direction],
    grid: &TimeGrid,
    noise: &NoiseBundle,
    basis: &RegressionBasis,
) -> Result<Vec<FirstRow>> {
    let n = spec.n_players;
    let ds: Vec<DirSpec> = (0..n)
        .flat_map(|h| dirs.iter().map(move |d| DirSpec::new(h, d.control())))
        .collect();
    let ens = simulate_paths(spec, controls, grid, noise)?;
    let sens = first_derivatives_sens(spec, &ens, noise, &ds)?;
    let adj = solve_adjoint(spec, &ens, noise, basis)?;
    let bsde = first_derivatives_bsde(spec, &ens, noise, &adj, &ds)?;
    drop(adj);
    drop(ens);
    let mut rows = Vec::new();
    for (q, d) in ds.iter().enumerate() {
        let fd = first_derivatives_fd(spec, controls, d.player, &d.control, grid, noise)?;
        for i in 0..n {
            let (f, s, b) = (est(&fd[i]), est(&sens[q][i]), est(&bsde[q][i]));
            let (gap_sens, tol_sens, ok1) = within(f, s, 3.0, FIRST_SLACK);
            let (gap_bsde, tol_bsde, ok2) = within(f, b, 3.0, FIRST_SLACK);
            rows.push(FirstRow {
                player: i,
                perturbed: d.player,
                direction: dirs[q % dirs.len()],
                fd: f,
                sens: s,
                bsde: b,
                gap_sens,
                tol_sens,
                gap_bsde,
                tol_bsde,
                ok: ok1 && ok2,
            });
        }
    }
    Ok(rows)
}

/// One row of the second-order three-way table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondRow {
    pub player: usize,
    pub h: usize,
    pub l: usize,
    pub dir_h: Direction,
    pub dir_l: Direction,
    pub fd: Estimate,
    pub z_oracle: Estimate,
    pub bsde: Estimate,
    /// Largest pairwise gap and its tolerance.
    pub worst_gap: f64,
    pub worst_tol: f64,
    pub ok: bool,
}

/// `δ²V_i/δu_hδu_ℓ` for every `i`, every pair `h < ℓ` and each direction
/// pair, by FD, the second-order sensitivity oracle and the BSDE trace formula.
#[allow(clippy::too_many_arguments)]
pub fn second_agreement(
    spec: &GameSpec,
    controls: &ControlProfile,
    dir_pairs: &[(Direction, Direction)],
    grid: &TimeGrid,
    noise: &NoiseBundle,
    basis: &RegressionBasis,
) -> Result<Vec<SecondRow>> {
    let n = spec.n_players;
    if n < 2 {
        return Err(Error::InvalidParameters("second cross derivatives need N ≥ 2".into()));
    }
    let ens = simulate_paths(spec, controls, grid, noise)?;
    let adj = solve_adjoint(spec, &ens, noise, basis)?;
    let seconds = (0..n)
        .map(|i| solve_second_adjoint(spec, &adj, i, &ens, noise, basis))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for h in 0..n {
        for l in h + 1..n {
            for &(da, db) in dir_pairs {
                let (dh, dl) = (DirSpec::new(h, da.control()), DirSpec::new(l, db.control()));
                let fd = second_derivatives_fd(spec, controls, h, l, &dh.control, &dl.control, grid, noise)?;
                let z = second_derivative_z_oracle(spec, &ens, noise, &dh, &dl)?;
                for i in 0..n {
                    let bs = second_derivative_bsde(spec, &ens, noise, &adj, &seconds[i], &dh, &dl, true)?;
                    let (f, zo, b) = (est(&fd[i]), est(&z[i]), est(&bs));
                    let mut worst_gap = 0.0f64;
                    let mut worst_tol = f64::INFINITY;
                    let mut ok = true;
                    for (x, y) in [(f, zo), (f, b), (zo, b)] {
                        let (g, t, good) = within(x, y, 5.0, SECOND_SLACK);
                        ok &= good;
                        if g - t > worst_gap - worst_tol {
                            worst_gap = g;
                            worst_tol = t;
                        }
                    }
                    rows.push(SecondRow {
                        player: i,
                        h,
                        l,
                        dir_h: da,
                        dir_l: db,
                        fd: f,
                        z_oracle: zo,
                        bsde: b,
                        worst_gap,
                        worst_tol,
                        ok,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// `N = 1` game with `dX = dW`, `X_0 = 0`, so the state is the Brownian motion.
pub fn brownian_game(horizon: f64) -> Result<GameSpec> {
    use crate::app::presets::{build_lq_game, LqParams};
    let p = LqParams {
        a: 0.0.into(),
        b: 0.0.into(),
        sigma: 1.0.into(),
        x0_mean: 0.0.into(),
        x0_std: 0.0.into(),
        ..LqParams::default()
    };
    Ok(build_lq_game(&p, 1, horizon)?.0)
}

/// One level of the closed-form BSDE ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormLevel {
    pub n_steps: usize,
    pub n_paths: usize,
    pub relative_l2_error: f64,
}

/// LSMC relative L² error on `y_t = W_t e^{a(T−t)}`, which solves
/// `−dy = a y dt − z dW`, `y_T = W_T`, with `z_t = e^{a(T−t)}`.
pub fn closed_form_bsde(a: f64, horizon: f64, n_steps: usize, n_paths: usize, seed: u64) -> Result<ClosedFormLevel> {
    let spec = brownian_game(horizon)?;
    let grid = TimeGrid::new(horizon, n_steps)?;
    let noise = NoiseBundle::generate(seed, n_paths, &grid, 1, 1)?;
    let ens = simulate_paths(&spec, &ControlProfile::zero(1), &grid, &noise)?;
    let bsde = MatrixLinearBsde {
        m: 1,
        d: 1,
        a: Box::new(move |_, _, o| o[0] = a),
        b: Box::new(|_, _, o| o[0] = 0.0),
        f: Box::new(|_, _, o| o[0] = 0.0),
        xi: Box::new(|x, o| o[0] = x[0]),
    };
    let sol = solve_linear_bsde(&bsde, &ens, &noise, &RegressionBasis::default())?;
    let parts = par_chunks(n_paths, |range| {
        let mut feat = vec![0.0; sol.max_basis()];
        let (mut yb, mut z, mut y) = (vec![0.0; 1], vec![0.0; 1], vec![0.0; 1]);
        let mut work = bsde.work();
        let (mut num, mut den) = (0.0, 0.0);
        for p in range {
            for k in 0..n_steps {
                sol.y_at(&bsde, &ens, k, p, &mut feat, &mut yb, &mut z, &mut work, &mut y);
                let exact = ens.x(p, k)[0] * (a * (horizon - grid.t(k))).exp();
                num += (y[0] - exact).powi(2);
                den += exact * exact;
            }
        }
        (num, den)
    });
    let (num, den) = parts.into_iter().fold((0.0, 0.0), |s, v| (s.0 + v.0, s.1 + v.1));
    Ok(ClosedFormLevel {
        n_steps,
        n_paths,
        relative_l2_error: (num / den).sqrt(),
    })
}

/// One random instance of the a priori bound check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AprioriInstance {
    pub index: usize,
    pub m: usize,
    pub d: usize,
    pub report: AprioriReport,
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * ((rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64))
}

/// Solve `count` random bounded linear BSDEs (`m, d ≤ 3`) with state-dependent
/// coefficients `A = A₀ cos x₀`, `B^j = B^j₀`, `f = f₀ sin x_{d−1}` and
/// `ξ = c₀ tanh x + c₁`, and evaluate the a priori bound on each.
pub fn apriori_instances(count: usize, n_steps: usize, n_paths: usize, seed: u64) -> Result<Vec<AprioriInstance>> {
    use crate::app::presets::{build_lq_game, LqParams};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for index in 0..count {
        let m = 1 + (rng.next_u64() % 3) as usize;
        let d = 1 + (rng.next_u64() % 3) as usize;
        let a0: Vec<f64> = (0..m * m).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        let b0: Vec<f64> = (0..d * m * m).map(|_| uniform(&mut rng, -0.5, 0.5)).collect();
        let f0: Vec<f64> = (0..m).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        let c0: Vec<f64> = (0..m).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        let c1: Vec<f64> = (0..m).map(|_| uniform(&mut rng, -0.5, 0.5)).collect();
        let (spec, _) = build_lq_game(&LqParams::default(), d, 1.0)?;
        let grid = TimeGrid::new(1.0, n_steps)?;
        let noise = NoiseBundle::generate(seed.wrapping_add(1 + index as u64), n_paths, &grid, d, d)?;
        let ens = simulate_paths(&spec, &ControlProfile::zero(d), &grid, &noise)?;
        let bsde = MatrixLinearBsde {
            m,
            d,
            a: Box::new(move |_, x, o| {
                let c = x[0].cos();
                for (o, a) in o.iter_mut().zip(&a0) {
                    *o = a * c;
                }
            }),
            b: Box::new(move |_, _, o| o.copy_from_slice(&b0)),
            f: Box::new(move |_, x, o| {
                let s = x[x.len() - 1].sin();
                for (o, f) in o.iter_mut().zip(&f0) {
                    *o = f * s;
                }
            }),
            xi: Box::new(move |x, o| {
                for r in 0..o.len() {
                    o[r] = c0[r] * x[r % x.len()].tanh() + c1[r];
                }
            }),
        };
        let sol = solve_linear_bsde(&bsde, &ens, &noise, &RegressionBasis::default())?;
        let report = apriori_bound_check(&bsde, &sol, &ens)?;
        out.push(AprioriInstance { index, m, d, report });
    }
    Ok(out)
}

/// Trace duality between player `i`'s second adjoint and `Y^ℓ (Y^h)ᵀ`.
#[allow(clippy::too_many_arguments)]
pub fn trace_duality(
    spec: &GameSpec,
    controls: &ControlProfile,
    i: usize,
    h: (usize, Direction),
    l: (usize, Direction),
    grid: &TimeGrid,
    noise: &NoiseBundle,
    basis: &RegressionBasis,
) -> Result<TraceDualityReport> {
    let ens = simulate_paths(spec, controls, grid, noise)?;
    let first = solve_adjoint(spec, &ens, noise, basis)?;
    let second = solve_second_adjoint(spec, &first, i, &ens, noise, basis)?;
    let y_h = propagate_sensitivity(spec, controls, &ens, h.0, &h.1.control(), noise)?;
    let y_l = propagate_sensitivity(spec, controls, &ens, l.0, &l.1.control(), noise)?;
    let p = SecondAdjointProcess {
        spec,
        ens: &ens,
        first: &first,
        second: &second,
    };
    let y = OuterProductProcess::new(spec, &ens, &y_l, &y_h)?;
    trace_duality_residual(&p, &y, noise.n_paths, grid.n_steps, grid.dt)
}

/// Empirical α̂ and the ledger bound at one `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n_players: usize,
    pub alpha_hat: Estimate,
    pub max_entry: Estimate,
    pub alpha_bound: f64,
}

/// Scaling study summary with log-log slopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub rows: Vec<ScalingRow>,
    pub alpha_slope: f64,
    pub bound_slope: f64,
}

/// α̂ (sensitivity route) and the ledger bound for each `N`.
#[allow(clippy::too_many_arguments)]
pub fn scaling_study<F, C>(
    build: F,
    controls: C,
    players: &[usize],
    dict: &[ScalarControl],
    horizon: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
    c_outer: f64,
) -> Result<Scaling>
where
    F: Fn(usize) -> Result<(GameSpec, ConstantLedger)>,
    C: Fn(usize) -> ControlProfile,
{
    let grid = TimeGrid::new(horizon, n_steps)?;
    let mut rows = Vec::with_capacity(players.len());
    for &n in players {
        let (spec, ledger) = build(n)?;
        let noise = NoiseBundle::generate(seed, n_paths, &grid, n, spec.n_drivers())?;
        let m = empirical_asymmetry(&spec, &controls(n), dict, &grid, &noise)?;
        let bl = BoundLedger::new(&ledger, horizon, spec.n_drivers(), c_outer)?;
        let bound = theoretical_alpha_bound(&ledger, &bl)?;
        let max_entry = m.max_entry().map(|e| Estimate::new(e.value, e.se)).unwrap_or_default();
        rows.push(ScalingRow {
            n_players: n,
            alpha_hat: m.alpha(),
            max_entry,
            alpha_bound: bound.alpha_bound,
        });
    }
    let x: Vec<f64> = rows.iter().map(|r| r.n_players as f64).collect();
    let a: Vec<f64> = rows.iter().map(|r| r.alpha_hat.value).collect();
    let b: Vec<f64> = rows.iter().map(|r| r.alpha_bound).collect();
    Ok(Scaling {
        alpha_slope: log_log_slope(&x, &a),
        bound_slope: log_log_slope(&x, &b),
        rows,
    })
}

/// One empirical moment against its bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    /// `"state"` or `"sensitivity"`.
    pub kind: String,
    pub p: f64,
    pub player: usize,
    /// Perturbed player for sensitivity rows.
    pub perturbed: Option<usize>,
    pub empirical: Estimate,
    pub bound: f64,
    pub ok: bool,
}

/// State and tangent-process sup-moments against their closed-form bounds.
#[allow(clippy::too_many_arguments)]
pub fn moment_study(
    spec: &GameSpec,
    ledger: &ConstantLedger,
    controls: &ControlProfile,
    direction: Direction,
    orders: &[f64],
    grid: &TimeGrid,
    noise: &NoiseBundle,
) -> Result<Vec<MomentRow>> {
    let n = spec.n_players;
    let ens = simulate_paths(spec, controls, grid, noise)?;
    let ys = (0..n)
        .map(|h| propagate_sensitivity(spec, controls, &ens, h, &direction.control(), noise))
        .collect::<Result<Vec<_>>>()?;
    let dir = direction.control();
    let mut rows = Vec::new();
    for &p in orders {
        let xi: Vec<f64> = (0..n).map(|i| spec.initial.abs_moment(i, p)).collect();
        let norms: Vec<f64> = controls.players.iter().map(|u| u.hp_norm_pow(grid, p)).collect();
        let mc = moment_bound_constants(ledger, p, &xi, &norms, grid.horizon)?;
        for i in 0..n {
            let e = empirical_moment(&ens, i, p)?;
            rows.push(MomentRow {
                kind: "state".into(),
                p,
                player: i,
                perturbed: None,
                empirical: e,
                bound: mc.c_x[i],
                ok: e.value <= mc.c_x[i],
            });
        }
        let dn = dir.hp_norm_pow(grid, p);
        for (h, y) in ys.iter().enumerate() {
            for i in 0..n {
                let e = sensitivity_moment(y, i, p)?;
                let b = sensitivity_moment_bound(ledger, p, dn, grid.horizon, h, i)?.bound;
                rows.push(MomentRow {
                    kind: "sensitivity".into(),
                    p,
                    player: i,
                    perturbed: Some(h),
                    empirical: e,
                    bound: b,
                    ok: e.value <= b,
                });
            }
        }
    }
    Ok(rows)
}

/// One unilateral deviation of the potential study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationRow {
    pub player: usize,
    pub direction: Direction,
    pub scale: f64,
    pub delta_v: Estimate,
    pub delta_phi: Estimate,
    pub gap: Estimate,
}

/// Potential study: Φ at the base profile and the gaps of sampled deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialStudy {
    pub phi: Estimate,
    pub deviations: Vec<DeviationRow>,
    pub asymmetry: AsymmetryMatrix,
    pub alpha_hat: Estimate,
    pub bound: AlphaBound,
}

/// Deviation `q` of a deterministic sample: player `q mod N`, direction
/// `q mod |𝒟|`, sign alternating every `|𝒟|` deviations.
pub fn sampled_deviation(q: usize, n: usize, dirs: &[Direction], scale: f64) -> (usize, Direction, f64) {
    let nd = dirs.len();
    let sign = if (q / nd).is_multiple_of(2) { 1.0 } else { -1.0 };
    (q % n, dirs[q % nd], sign * scale)
}

/// Φ at `a` (anchored at zero) and the gaps of `count` sampled deviations.
#[allow(clippy::too_many_arguments)]
pub fn potential_study(
    spec: &GameSpec,
    ledger: &ConstantLedger,
    a: &ControlProfile,
    dirs: &[Direction],
    count: usize,
    scale: f64,
    cfg: &PotentialConfig,
    grid: &TimeGrid,
    noise: &NoiseBundle,
    c_outer: f64,
) -> Result<PotentialStudy> {
    let n = spec.n_players;
    let dict: Vec<ScalarControl> = dirs.iter().map(|d| d.control()).collect();
    let asymmetry = empirical_asymmetry(spec, a, &dict, grid, noise)?;
    let bl = BoundLedger::new(ledger, grid.horizon, spec.n_drivers(), c_outer)?;
    let bound = theoretical_alpha_bound(ledger, &bl)?;
    let z = ControlProfile::zero(n);
    let phi = potential_value(spec, &z, a, cfg, grid, noise)?.value;
    let mut deviations = Vec::with_capacity(count);
    for q in 0..count {
        let (i, d, s) = sampled_deviation(q, n, dirs, scale);
        let b = a.perturbed(i, s, &d.control());
        let dv = cost_differences(spec, a, &b, grid, noise)?[i];
        let pb = potential_value(spec, &z, &b, cfg, grid, noise)?.value;
        let dphi = Estimate::new(pb.value - phi.value, pb.se + phi.se);
        deviations.push(DeviationRow {
            player: i,
            direction: d,
            scale: s,
            delta_v: dv,
            delta_phi: dphi,
            gap: Estimate::new((dv.value - dphi.value).abs(), dv.se + dphi.se),
        });
    }
    Ok(PotentialStudy {
        phi,
        deviations,
        alpha_hat: asymmetry.alpha(),
        asymmetry,
        bound,
    })
}

/// Nash-gap study at the potential minimizer over the three-term family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashStudy {
    pub theta: Vec<f64>,
    pub iterations: usize,
    pub gradient_max: f64,
    pub jacobian_asymmetry: f64,
    pub exploitability: Estimate,
    pub per_player: Vec<Estimate>,
    pub eps_opt: f64,
    pub alpha_hat: Estimate,
    /// `α̂ + ε_opt + 3 SE`.
    pub allowance: f64,
}

/// Minimize Φ over `θ₀ + θ₁ t/T + θ₂ sin(2πt/T)` per player, then measure
/// exploitability and the optimization slack over `dirs` with steps `±scale`.
pub fn nash_study(
    spec: &GameSpec,
    dirs: &[Direction],
    scale: f64,
    grid: &TimeGrid,
    noise: &NoiseBundle,
) -> Result<NashStudy> {
    let n = spec.n_players;
    let fam = three_term_family();
    let min = minimize_potential(spec, &fam, &MinimizerConfig::default(), grid, noise)?;
    let prof = min.profile(&fam, n);
    let dict: Vec<ScalarControl> = dirs.iter().map(|d| d.control()).collect();
    let scales = [scale, -scale];
    let ex = exploitability(spec, &prof, &dict, &scales, grid, noise)?;
    let eps_opt = optimization_slack(spec, &prof, &dict, &scales, grid, noise)?;
    let alpha_hat = empirical_asymmetry(spec, &prof, &dict, grid, noise)?.alpha();
    Ok(NashStudy {
        gradient_max: min.gradient.iter().fold(0.0f64, |m, e| m.max(e.value.abs())),
        theta: min.theta,
        iterations: min.iterations,
        jacobian_asymmetry: min.jacobian_asymmetry,
        allowance: alpha_hat.value + eps_opt + 3.0 * ex.value.se,
        exploitability: ex.value,
        per_player: ex.per_player,
        eps_opt,
        alpha_hat,
    })
}
