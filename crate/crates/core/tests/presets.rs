// SPDX-License-Identifier: MIT OR Apache-2.0

//! Every preset satisfies its own constant ledger and its analytic partials
//! agree with central differences.

use alpha_games::app::presets::*;
use alpha_games::model::{validate_game, ConstantLedger, GameSpec};
use proptest::prelude::*;

fn check(spec: &GameSpec, ledger: &ConstantLedger) {
    assert!(ledger.is_consistent(), "{}: inconsistent ledger", spec.name);
    let rep = validate_game(spec, ledger, &validation_box(spec.horizon), 400).unwrap();
    let bad: Vec<_> = rep
        .ratios
        .iter()
        .filter(|e| e.worst_ratio > 1.0 + 1e-6)
        .map(|e| format!("{} p{} {:.4} at {}", e.tag, e.player, e.worst_ratio, e.worst_point))
        .chain(
            rep.consistency
                .iter()
                .filter(|e| !e.passed)
                .map(|e| format!("{} p{} err {:e}", e.tag, e.player, e.worst_error)),
        )
        .collect();
    assert!(rep.passed && bad.is_empty(), "{}: {bad:?}", spec.name);
}

#[test]
fn lq_default_validates() {
    for n in [1, 2, 3, 5] {
        let (s, l) = build_lq_game(&LqParams::default(), n, 1.0).unwrap();
        check(&s, &l);
    }
}

#[test]
fn lq_full_coupling_validates() {
    let p = LqParams {
        a_bar: 0.3.into(),
        c: 0.1.into(),
        c_bar: 0.2.into(),
        d: 0.2.into(),
        drift_shift: 0.1.into(),
        q_bar: PlayerParam::Spread { lo: 0.0, hi: 1.0 },
        g_bar: 0.5.into(),
        ..LqParams::default()
    };
    let (s, l) = build_lq_game(&p, 4, 1.0).unwrap();
    check(&s, &l);
}

#[test]
fn mean_field_validates() {
    for n in [2, 4] {
        let (s, l) = build_mean_field_game(&MeanFieldParams::default(), n, 1.0).unwrap();
        check(&s, &l);
    }
}

#[test]
fn common_noise_validates() {
    let (s, l) = build_common_noise_game(&CommonNoiseParams::default(), 3, 1.0).unwrap();
    assert_eq!(s.n_drivers(), 4);
    check(&s, &l);
}

#[test]
fn tanh_validates() {
    for n in [1, 2, 3] {
        let (s, l) = build_tanh_game(&TanhParams::default(), n, 1.0).unwrap();
        assert!(l.gaps_sampled);
        check(&s, &l);
    }
}

#[test]
fn mean_field_gaps_scale_inverse_square() {
    let p = MeanFieldParams::default();
    let (_, l2) = build_mean_field_game(&p, 2, 1.0).unwrap();
    let (_, l4) = build_mean_field_game(&p, 4, 1.0).unwrap();
    // identical q and G: only the x̄² weights differ, Hessian 𝟙𝟙ᵀ/N²
    let w = |n: usize| -> f64 {
        let v = p.w.resolve(n, "w").unwrap();
        let o = p.omega.resolve(n, "omega").unwrap();
        (v[0] - v[n - 1]).abs() / (n * n) as f64 + (o[0] - o[n - 1]).abs() / (n * n) as f64
    };
    let g2 = l2.gap(0, 1);
    let g4 = l4.gap(0, 3);
    assert!((g2.fxx[1] + g2.gxx[1] - w(2)).abs() < 1e-12);
    assert!((g4.fxx[5] + g4.gxx[5] - w(4)).abs() < 1e-12);
}

#[test]
fn bad_parameters_rejected() {
    let p = LqParams {
        r: 0.0.into(),
        ..LqParams::default()
    };
    assert!(build_lq_game(&p, 2, 1.0).is_err());
    let p = LqParams {
        q_hat: PlayerParam::List(vec![1.0, 2.0]),
        ..LqParams::default()
    };
    assert!(build_lq_game(&p, 3, 1.0).is_err());
}

proptest! {
    #[test]
    fn spread_endpoints_and_monotone(lo in -5.0f64..5.0, hi in -5.0f64..5.0, n in 2usize..12) {
        let v = PlayerParam::Spread { lo, hi }.resolve(n, "x").unwrap();
        prop_assert_eq!(v.len(), n);
        prop_assert!((v[0] - lo).abs() < 1e-12 && (v[n - 1] - hi).abs() < 1e-12);
        for w in v.windows(2) {
            prop_assert!((w[1] - w[0]) * (hi - lo) >= -1e-12);
        }
    }

    #[test]
    fn lq_gap_table_antisymmetric_in_norm(q in prop::collection::vec(0.0f64..3.0, 3), gb in 0.0f64..2.0) {
        let p = LqParams { q_hat: PlayerParam::List(q), g_bar: gb.into(), ..LqParams::default() };
        let (_, l) = build_lq_game(&p, 3, 1.0).unwrap();
        for i in 0..3 {
            prop_assert!(l.gap(i, i).fxx.iter().all(|v| *v == 0.0));
            for j in 0..3 {
                prop_assert_eq!(&l.gap(i, j).fxx, &l.gap(j, i).fxx);
            }
        }
    }
}
