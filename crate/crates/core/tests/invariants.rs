// SPDX-License-Identifier: MIT OR Apache-2.0

//! Property tests of structural invariants.
//!
//! ```text
//! identical costs, decoupled dynamics   ⇒  A_ij ≡ 0, so α̂ is at roundoff
//! asym[i][j] = asym[j][i],  asym[i][i] = 0,  α̂ ≥ 2·max_ij asym[i][j]
//! Gauss–Legendre with n nodes integrates degree ≤ 2n − 1 exactly on [0, 1]
//! fitted log-log slope of c·N^k is k
//! ```

use alpha_games::alpha::{empirical_asymmetry, gauss_legendre};
use alpha_games::app::checks::ROUNDOFF_FLOOR;
use alpha_games::app::presets::{build_lq_game, LqParams, PlayerParam};
use alpha_games::model::controls::dictionary_control;
use alpha_games::model::{ControlProfile, Direction, NoiseBundle, ScalarControl, TimeGrid};
use alpha_games::stats::log_log_slope;
use proptest::prelude::*;

fn dict() -> Vec<ScalarControl> {
    Direction::ALL.iter().map(|d| d.control()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn identical_costs_have_no_asymmetry(
        n in 2usize..5,
        q in 0.1f64..2.0,
        g in 0.0f64..2.0,
        a_lo in -1.0f64..0.5,
        sigma in 0.05f64..0.5,
        c0 in -0.5f64..0.5,
        seed in 0u64..1000,
    ) {
        let p = LqParams {
            a: PlayerParam::Spread { lo: a_lo, hi: a_lo + 0.3 },
            sigma: sigma.into(),
            q_hat: q.into(),
            g: g.into(),
            ..LqParams::default()
        };
        let (spec, _) = build_lq_game(&p, n, 1.0).unwrap();
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let noise = NoiseBundle::generate(seed, 512, &grid, n, spec.n_drivers()).unwrap();
        let u = ControlProfile::new(vec![dictionary_control(&[c0, 0.2]); n]);
        let m = empirical_asymmetry(&spec, &u, &dict(), &grid, &noise).unwrap();
        prop_assert!(m.alpha().value <= ROUNDOFF_FLOOR, "alpha_hat {}", m.alpha().value);
    }

    #[test]
    fn asymmetry_matrix_structure(
        n in 2usize..5,
        lo in 0.1f64..1.0,
        width in 0.1f64..1.5,
        seed in 0u64..1000,
    ) {
        let p = LqParams { q_hat: PlayerParam::Spread { lo, hi: lo + width }, a_bar: 0.2.into(), ..LqParams::default() };
        let (spec, _) = build_lq_game(&p, n, 1.0).unwrap();
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let noise = NoiseBundle::generate(seed, 512, &grid, n, spec.n_drivers()).unwrap();
        let m = empirical_asymmetry(&spec, &ControlProfile::new(vec![dictionary_control(&[0.3]); n]), &dict(), &grid, &noise).unwrap();
        let mut largest = 0.0f64;
        for i in 0..n {
            prop_assert_eq!(m.get(i, i).value, 0.0);
            for j in 0..n {
                prop_assert_eq!(m.get(i, j), m.get(j, i));
                prop_assert!(m.get(i, j).value >= 0.0 && m.get(i, j).se >= 0.0);
                largest = largest.max(m.get(i, j).value);
            }
        }
        prop_assert!(m.alpha().value >= 2.0 * largest - 1e-15);
        prop_assert!(largest > ROUNDOFF_FLOOR, "heterogeneous costs should be asymmetric");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gauss_legendre_exact_for_polynomials(
        order in 1usize..12,
        coefs in proptest::collection::vec(-3.0f64..3.0, 1..24),
    ) {
        let degree = (2 * order - 1).min(coefs.len() - 1);
        let (x, w) = gauss_legendre(order).unwrap();
        let quad: f64 = x.iter().zip(&w).map(|(&t, &wt)| {
            wt * coefs[..=degree].iter().enumerate().map(|(k, c)| c * t.powi(k as i32)).sum::<f64>()
        }).sum();
        let exact: f64 = coefs[..=degree].iter().enumerate().map(|(k, c)| c / (k as f64 + 1.0)).sum();
        prop_assert!((quad - exact).abs() <= 1e-11 * (1.0 + exact.abs()), "{quad} vs {exact}");
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        prop_assert!(x.iter().all(|&t| t > 0.0 && t < 1.0));
    }

    #[test]
    fn log_log_slope_recovers_power(k in -3.0f64..3.0, c in 0.01f64..100.0) {
        let xs = [2.0, 4.0, 8.0, 16.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| c * x.powf(k)).collect();
        prop_assert!((log_log_slope(&xs, &ys) - k).abs() < 1e-10);
    }
}
