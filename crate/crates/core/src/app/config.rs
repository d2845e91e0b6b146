// SPDX-License-Identifier: MIT OR Apache-2.0

//! Experiment configuration.
//!
//! A run is described by one JSON document. Every key is optional and falls
//! back to the default shown below. Unknown keys are rejected, and command-line
//! flags override the corresponding keys.
//!
//! ```text
//! {
//!   "game": { "preset": "lq" | "mean_field" | "common_noise" | "tanh", ...preset parameters },
//!   "n_players": 3, "horizon": 1.0, "n_steps": 50, "n_paths": 20000, "seed": 1,
//!   "out": "out",
//!   "controls": [0.3, 0.2, 0.0, 0.0],        dictionary coefficients [const, lin, sin, ind]
//!   "player_controls": null,                 optional per-player coefficient lists
//!   "directions": ["constant", "linear", "sine", "indicator"],
//!   "basis": { "degree": 2, "ridge": 1e-8, "ridge_max": 1e-2, "cond_max": 1e12 },
//!   "c_outer": 1.0, "quadrature_order": 8,
//!   "deviation_scale": 0.5, "n_deviations": 8,
//!   "scaling_players": [2, 4, 8, 16], "moment_orders": [2.0, 4.0],
//!   "allow_long": false
//! }
//! ```
//!
//! Desk-scale budgets are `N ≤ 16`, `M ∈ [20, 200]` and
//! `paths ∈ [10³, 4·10⁵]`. Runs outside them, or whose estimated cost exceeds
//! ten minutes, are rejected unless `allow_long` is set.

use crate::app::presets::{
    build_common_noise_game, build_lq_game, build_mean_field_game, build_tanh_game, CommonNoiseParams, LqParams,
    MeanFieldParams, TanhParams,
};
use crate::bsde::RegressionBasis;
use crate::error::{Error, Result};
use crate::model::controls::dictionary_control;
use crate::model::{ConstantLedger, ControlProfile, Direction, GameSpec, NoiseBundle, ScalarControl, TimeGrid};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Game preset with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum GameConfig {
    Lq(LqParams),
    MeanField(MeanFieldParams),
    CommonNoise(CommonNoiseParams),
    Tanh(TanhParams),
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig::Lq(LqParams::default())
    }
}

impl GameConfig {
    pub fn name(&self) -> &'static str {
        match self {
            GameConfig::Lq(_) => "lq",
            GameConfig::MeanField(_) => "mean_field",
            GameConfig::CommonNoise(_) => "common_noise",
            GameConfig::Tanh(_) => "tanh",
        }
    }

    /// Build the game and its constant ledger for `n` players.
    pub fn build(&self, n: usize, horizon: f64) -> Result<(GameSpec, ConstantLedger)> {
        match self {
            GameConfig::Lq(p) => build_lq_game(p, n, horizon),
            GameConfig::MeanField(p) => build_mean_field_game(p, n, horizon),
            GameConfig::CommonNoise(p) => build_common_noise_game(p, n, horizon),
            GameConfig::Tanh(p) => build_tanh_game(p, n, horizon),
        }
    }
}

/// Largest number of players within the desk budget.
pub const MAX_PLAYERS: usize = 16;
/// Step-count range within the desk budget.
pub const STEP_RANGE: (usize, usize) = (20, 200);
/// Path-count range within the desk budget.
pub const PATH_RANGE: (usize, usize) = (1_000, 400_000);
/// Estimated-cost threshold above which `allow_long` is required, in seconds.
pub const LONG_RUN_SECONDS: f64 = 600.0;

/// Full description of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameConfig,
    pub n_players: usize,
    pub horizon: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Dictionary coefficients of the base control shared by all players.
    pub controls: Vec<f64>,
    /// Per-player dictionary coefficients; overrides `controls` when set.
    pub player_controls: Option<Vec<Vec<f64>>>,
    pub directions: Vec<Direction>,
    pub basis: RegressionBasis,
    pub c_outer: f64,
    pub quadrature_order: usize,
    pub deviation_scale: f64,
    pub n_deviations: usize,
    pub scaling_players: Vec<usize>,
    pub moment_orders: Vec<f64>,
    pub allow_long: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            game: GameConfig::default(),
            n_players: 3,
            horizon: 1.0,
            n_steps: 50,
            n_paths: 20_000,
            seed: 1,
            out: PathBuf::from("out"),
            controls: vec![0.3, 0.2, 0.0, 0.0],
            player_controls: None,
            directions: Direction::ALL.to_vec(),
            basis: RegressionBasis::default(),
            c_outer: 1.0,
            quadrature_order: 8,
            deviation_scale: 0.5,
            n_deviations: 8,
            scaling_players: vec![2, 4, 8, 16],
            moment_orders: vec![2.0, 4.0],
            allow_long: false,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub steps: Option<usize>,
    pub players: Option<usize>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parse a JSON document; errors carry the line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("line {} column {}: {e}", e.line(), e.column())))
    }

    /// Read and parse a configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Canonical JSON echo (fixed key order, every key present).
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(p) = o.paths {
            self.n_paths = p;
        }
        if let Some(m) = o.steps {
            self.n_steps = m;
        }
        if let Some(n) = o.players {
            self.n_players = n;
        }
        if let Some(d) = &o.out {
            self.out = d.clone();
        }
    }

    /// Check ranges and budgets. `cost_factor` is the command's cost in
    /// units of one simulated path-step-player (see [`estimated_seconds`]).
    ///
    /// [`estimated_seconds`]: Self::estimated_seconds
    pub fn validate(&self, cost_factor: f64) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_players == 0 {
            return bad("n_players must be ≥ 1".into());
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return bad(format!("horizon must be positive (got {})", self.horizon));
        }
        if self.n_steps == 0 || self.n_paths < 2 {
            return bad("n_steps must be ≥ 1 and n_paths ≥ 2".into());
        }
        if self.controls.len() > Direction::ALL.len() {
            return bad(format!(
                "controls has {} coefficients, at most 4 allowed",
                self.controls.len()
            ));
        }
        if let Some(pc) = &self.player_controls {
            if pc.len() != self.n_players || pc.iter().any(|c| c.len() > Direction::ALL.len()) {
                return bad("player_controls needs one list of ≤ 4 coefficients per player".into());
            }
        }
        if self.directions.is_empty() {
            return bad("directions must not be empty".into());
        }
        if !(self.c_outer.is_finite() && self.c_outer > 0.0) {
            return bad("c_outer must be positive".into());
        }
        if self.quadrature_order == 0 || self.n_deviations == 0 {
            return bad("quadrature_order and n_deviations must be ≥ 1".into());
        }
        if !self.deviation_scale.is_finite() {
            return bad("deviation_scale must be finite".into());
        }
        if self.scaling_players.len() < 2 || self.scaling_players.contains(&0) {
            return bad("scaling_players needs at least two positive entries".into());
        }
        if self.moment_orders.iter().any(|&p| p.is_nan() || p < 2.0) {
            return bad("moment_orders must be ≥ 2".into());
        }
        if !self.allow_long {
            let largest = self
                .scaling_players
                .iter()
                .copied()
                .max()
                .unwrap_or(0)
                .max(self.n_players);
            if largest > MAX_PLAYERS {
                return bad(format!(
                    "{largest} players exceeds the desk budget of {MAX_PLAYERS}; set allow_long"
                ));
            }
            if self.n_steps < STEP_RANGE.0 || self.n_steps > STEP_RANGE.1 {
                return bad(format!(
                    "n_steps = {} is outside [{}, {}]; set allow_long",
                    self.n_steps, STEP_RANGE.0, STEP_RANGE.1
                ));
            }
            if self.n_paths < PATH_RANGE.0 || self.n_paths > PATH_RANGE.1 {
                return bad(format!(
                    "n_paths = {} is outside [{}, {}]; set allow_long",
                    self.n_paths, PATH_RANGE.0, PATH_RANGE.1
                ));
            }
            let secs = self.estimated_seconds(cost_factor);
            if secs > LONG_RUN_SECONDS {
                return bad(format!(
                    "estimated run time {secs:.0} s exceeds ten minutes; set allow_long"
                ));
            }
        }
        Ok(())
    }

    /// Rough single-core run time for `cost_factor` sweeps over the
    /// path-step-player grid (about 20 ns per unit).
    pub fn estimated_seconds(&self, cost_factor: f64) -> f64 {
        2e-8 * cost_factor * (self.n_paths * self.n_steps * self.n_players) as f64
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon, self.n_steps)
    }

    pub fn build_game(&self) -> Result<(GameSpec, ConstantLedger)> {
        self.build_game_with(self.n_players)
    }

    pub fn build_game_with(&self, n: usize) -> Result<(GameSpec, ConstantLedger)> {
        self.game.build(n, self.horizon)
    }

    /// Common-random-number noise for `n` players.
    pub fn noise(&self, grid: &TimeGrid, spec: &GameSpec) -> Result<NoiseBundle> {
        NoiseBundle::generate(self.seed, self.n_paths, grid, spec.n_players, spec.n_drivers())
    }

    /// Base control profile for `n` players.
    pub fn profile(&self, n: usize) -> ControlProfile {
        match &self.player_controls {
            Some(pc) if pc.len() == n => ControlProfile::new(pc.iter().map(|c| dictionary_control(c)).collect()),
            _ => ControlProfile::new(vec![dictionary_control(&self.controls); n]),
        }
    }

    pub fn direction_controls(&self) -> Vec<ScalarControl> {
        self.directions.iter().map(|d| d.control()).collect()
    }

    pub fn direction_ids(&self) -> Vec<&'static str> {
        self.directions.iter().map(|d| d.id()).collect()
    }
}
