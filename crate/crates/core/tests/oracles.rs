// SPDX-License-Identifier: MIT OR Apache-2.0

//! Estimators against independent closed forms.
//!
//! ```text
//! single-player LQ, open loop:  dX = (aX + bu) dt + σ dW,  V = ½E[∫ q X² + r u² dt + g X_T²]
//!   P' = −2aP + (b²/r)P² − q,  P(T) = g
//!   m' = (a − b²P/r) m,  u*(t) = −(b/r) P(t) m(t)
//!   v' = 2a v + σ²  (variance, independent of u)
//!   V(u*) = ½ P(0) m_0² + ½ ∫ q v dt + ½ g v_T
//! one player:  Φ(a) − Φ(z) = V(a) − V(z)
//! ```
//!
//! The ODEs are integrated with classical RK4 on a grid 50 times finer than
//! the simulation grid.

use alpha_games::alpha::{cost_differences, exploitability, potential_value, three_term_family, PotentialConfig};
use alpha_games::app::experiments::closed_form_bsde;
use alpha_games::app::presets::{build_lq_game, LqParams};
use alpha_games::derivatives::cost_value;
use alpha_games::model::controls::dictionary_control;
use alpha_games::model::{ControlProfile, GameSpec, NoiseBundle, ScalarControl, TimeGrid};
use alpha_games::sim::simulate_paths;

const A: f64 = -0.4;
const B: f64 = 1.0;
const SIGMA: f64 = 0.3;
const Q: f64 = 1.0;
const R: f64 = 0.5;
const G: f64 = 2.0;
const M0: f64 = 0.8;
const S0: f64 = 0.2;
const T: f64 = 1.0;

/// With one player `x̄ = x`, so the running weight is `Q̄` and the terminal one `Ḡ`.
fn single_player() -> GameSpec {
    let p = LqParams {
        a: A.into(),
        b: B.into(),
        sigma: SIGMA.into(),
        q_hat: 0.0.into(),
        q_bar: Q.into(),
        r: R.into(),
        g: 0.0.into(),
        g_bar: G.into(),
        x0_mean: M0.into(),
        x0_std: S0.into(),
        ..LqParams::default()
    };
    build_lq_game(&p, 1, T).unwrap().0
}

fn rk4(y: f64, t: f64, h: f64, f: impl Fn(f64, f64) -> f64) -> f64 {
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
    let k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
    let k4 = f(t + h, y + h * k3);
    y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Riccati solution on a fine grid, the optimal control at the nodes of an
/// `n_steps` grid, and the optimal cost.
fn riccati(n_steps: usize) -> (Vec<f64>, f64) {
    let fine = 50 * n_steps;
    let h = T / fine as f64;
    let mut p = vec![0.0; fine + 1];
    p[fine] = G;
    for k in (0..fine).rev() {
        // Backward in time: integrate −P' from T downwards.
        p[k] = rk4(p[k + 1], T - (k + 1) as f64 * h, h, |_, y| {
            -(-2.0 * A * y + B * B / R * y * y - Q)
        });
    }
    let p_at = |t: f64| {
        let s = t / h;
        let k = (s.floor() as usize).min(fine - 1);
        p[k] + (s - k as f64) * (p[k + 1] - p[k])
    };
    let mut m = M0;
    let mut v = S0 * S0;
    let mut var_cost = 0.0;
    let mut u = Vec::with_capacity(n_steps + 1);
    for (k, &pk) in p.iter().enumerate().take(fine) {
        let t = k as f64 * h;
        if k % 50 == 0 {
            u.push(-B / R * pk * m);
        }
        let v_next = rk4(v, t, h, |_, y| 2.0 * A * y + SIGMA * SIGMA);
        var_cost += 0.5 * h * Q * (v + v_next);
        v = v_next;
        m = rk4(m, t, h, |s, y| (A - B * B * p_at(s) / R) * y);
    }
    u.push(-B / R * p[fine] * m);
    let cost = 0.5 * p[0] * M0 * M0 + 0.5 * var_cost + 0.5 * G * v;
    (u, cost)
}

#[test]
fn riccati_control_matches_optimal_cost() {
    let n_steps = 100;
    let spec = single_player();
    let grid = TimeGrid::new(T, n_steps).unwrap();
    let noise = NoiseBundle::generate(17, 40_000, &grid, 1, 1).unwrap();
    let (u, v_star) = riccati(n_steps);
    let prof = ControlProfile::new(vec![ScalarControl::tabulated(u)]);
    let ens = simulate_paths(&spec, &prof, &grid, &noise).unwrap();
    let v = cost_value(&spec, &ens).unwrap()[0];
    // Monte Carlo error plus first-order time-discretization bias.
    let tol = 3.0 * v.se + 2.0 * grid.dt * v_star;
    assert!(
        (v.value - v_star).abs() <= tol,
        "MC {} ± {}, Riccati {v_star}",
        v.value,
        v.se
    );
}

#[test]
fn riccati_control_is_unexploitable() {
    let n_steps = 100;
    let spec = single_player();
    let grid = TimeGrid::new(T, n_steps).unwrap();
    let noise = NoiseBundle::generate(18, 20_000, &grid, 1, 1).unwrap();
    let (u, _) = riccati(n_steps);
    let prof = ControlProfile::new(vec![ScalarControl::tabulated(u)]);
    let ex = exploitability(
        &spec,
        &prof,
        &three_term_family(),
        &[-0.5, -0.1, 0.1, 0.5],
        &grid,
        &noise,
    )
    .unwrap();
    // Deviations from the optimum cannot lower the cost beyond the
    // O(dt) mismatch between the continuous and the discrete optimum.
    for d in &ex.deviations {
        assert!(
            d.improvement.value <= 3.0 * d.improvement.se + 0.05 * grid.dt * d.scale.abs(),
            "deviation {:?} improves by {} ± {}",
            (d.direction, d.scale),
            d.improvement.value,
            d.improvement.se
        );
    }
    // A visibly suboptimal control is exploitable.
    let zero = ControlProfile::zero(1);
    let ex0 = exploitability(&spec, &zero, &three_term_family(), &[-0.5, 0.5], &grid, &noise).unwrap();
    assert!(ex0.value.value > 10.0 * ex0.value.se + 1e-3, "{:?}", ex0.value);
}

#[test]
fn single_player_potential_is_the_cost() {
    let spec = single_player();
    let grid = TimeGrid::new(T, 40).unwrap();
    let noise = NoiseBundle::generate(19, 10_000, &grid, 1, 1).unwrap();
    let z = ControlProfile::zero(1);
    for coefs in [[0.3, 0.2, 0.0], [-0.5, 0.0, 0.4], [0.1, -0.6, -0.2]] {
        let a = ControlProfile::new(vec![dictionary_control(&coefs)]);
        let phi = potential_value(&spec, &z, &a, &PotentialConfig::default(), &grid, &noise).unwrap();
        let dv = cost_differences(&spec, &z, &a, &grid, &noise).unwrap()[0];
        let tol = 3.0 * (phi.value.se + dv.se) + 1e-8;
        assert!(
            (phi.value.value - dv.value).abs() <= tol,
            "{coefs:?}: Φ {} ± {}, ΔV {} ± {}",
            phi.value.value,
            phi.value.se,
            dv.value,
            dv.se
        );
    }
}

#[test]
fn closed_form_bsde_several_rates() {
    for a in [-0.5, 0.0, 0.5, 1.0] {
        let lvl = closed_form_bsde(a, 1.0, 20, 8_000, 23).unwrap();
        assert!(lvl.relative_l2_error < 0.05, "a = {a}: {}", lvl.relative_l2_error);
    }
}
