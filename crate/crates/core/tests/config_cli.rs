// SPDX-License-Identifier: MIT OR Apache-2.0

//! Configuration parsing, overrides, budgets and the command-line exit codes.

use alpha_games::app::config::{ExperimentConfig, GameConfig, Overrides};
use alpha_games::app::presets::{LqParams, PlayerParam};
use alpha_games::Error;
use proptest::prelude::*;
use std::path::PathBuf;
use std::process::Command;

#[test]
fn empty_document_gives_defaults() {
    let c = ExperimentConfig::from_json("{}").unwrap();
    assert_eq!(c, ExperimentConfig::default());
    c.validate(1.0).unwrap();
}

#[test]
fn unknown_keys_are_rejected_with_position() {
    let err = ExperimentConfig::from_json("{\n  \"n_player\": 3\n}").unwrap_err();
    match err {
        Error::Config(m) => {
            assert!(m.contains("line 2"), "{m}");
            assert!(m.contains("n_player"), "{m}");
        }
        other => panic!("expected a configuration error, got {other:?}"),
    }
}

#[test]
fn preset_parameters_parse() {
    let c = ExperimentConfig::from_json(
        r#"{ "game": { "preset": "lq", "q_bar": { "lo": 0.5, "hi": 1.5 }, "r": [1.0, 2.0] }, "n_players": 2 }"#,
    )
    .unwrap();
    match &c.game {
        GameConfig::Lq(p) => {
            assert_eq!(p.q_bar, PlayerParam::Spread { lo: 0.5, hi: 1.5 });
            assert_eq!(p.r, PlayerParam::List(vec![1.0, 2.0]));
        }
        other => panic!("wrong preset {other:?}"),
    }
    c.build_game().unwrap();
}

#[test]
fn overrides_take_precedence() {
    let mut c = ExperimentConfig::default();
    c.apply(&Overrides {
        seed: Some(9),
        paths: Some(5000),
        steps: None,
        players: Some(4),
        out: Some(PathBuf::from("elsewhere")),
    });
    assert_eq!((c.seed, c.n_paths, c.n_steps, c.n_players), (9, 5000, 50, 4));
    assert_eq!(c.out, PathBuf::from("elsewhere"));
}

#[test]
fn budget_guard_and_allow_long() {
    let mut c = ExperimentConfig {
        n_paths: 400_000,
        n_steps: 200,
        n_players: 16,
        ..ExperimentConfig::default()
    };
    assert!(matches!(c.validate(100.0), Err(Error::Config(_))));
    c.allow_long = true;
    c.validate(100.0).unwrap();
    let steps = ExperimentConfig {
        n_steps: 5,
        ..ExperimentConfig::default()
    };
    assert!(matches!(steps.validate(1.0), Err(Error::Config(_))));
    let players = ExperimentConfig {
        n_players: 17,
        ..ExperimentConfig::default()
    };
    assert!(matches!(players.validate(1.0), Err(Error::Config(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn json_round_trip(
        n in 1usize..16,
        steps in 20usize..200,
        paths in 1000usize..400_000,
        seed in any::<u64>(),
        lo in -2.0f64..2.0,
        width in 0.0f64..2.0,
        controls in proptest::collection::vec(-1.0f64..1.0, 0..=4),
    ) {
        let c = ExperimentConfig {
            game: GameConfig::Lq(LqParams { q_hat: PlayerParam::Spread { lo, hi: lo + width }, ..LqParams::default() }),
            n_players: n,
            n_steps: steps,
            n_paths: paths,
            seed,
            controls,
            ..ExperimentConfig::default()
        };
        let back = ExperimentConfig::from_json(&c.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, c);
    }
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_alpha-games"))
        .args(args)
        .output()
        .unwrap()
}

fn scratch_dir(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("alpha-games-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn cli_simulate_writes_report_and_exits_zero() {
    let d = scratch_dir("simulate");
    let cfg = d.join("c.json");
    std::fs::write(&cfg, r#"{ "n_players": 2, "n_steps": 20, "n_paths": 1000 }"#).unwrap();
    let out = d.join("out");
    let o = cli(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(rep["command"], "simulate");
    assert_eq!(rep["config"]["seed"], 3);
    assert_eq!(rep["passed"], true);
    assert!(out.join("tables").read_dir().unwrap().count() > 0);

    // Identical inputs give byte-identical reports.
    let out2 = d.join("out2");
    let o = cli(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "3",
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let a = std::fs::read_to_string(out.join("report.json")).unwrap();
    let b = std::fs::read_to_string(out2.join("report.json")).unwrap();
    assert_eq!(
        a.replace(out.to_str().unwrap(), ""),
        b.replace(out2.to_str().unwrap(), "")
    );
}

#[test]
fn cli_config_errors_exit_two() {
    let d = scratch_dir("errors");
    let missing = d.join("missing.json");
    assert_eq!(
        cli(&["alpha", "--config", missing.to_str().unwrap()]).status.code(),
        Some(2)
    );

    let bad = d.join("bad.json");
    std::fs::write(&bad, r#"{ "bogus": 1 }"#).unwrap();
    assert_eq!(
        cli(&["alpha", "--config", bad.to_str().unwrap()]).status.code(),
        Some(2)
    );

    let good = d.join("good.json");
    std::fs::write(&good, "{}").unwrap();
    let o = cli(&["simulate", "--config", good.to_str().unwrap(), "--steps", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_steps"));

    assert_eq!(cli(&["no-such-command"]).status.code(), Some(2));
}
