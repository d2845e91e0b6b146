// SPDX-License-Identifier: MIT OR Apache-2.0

//! Decoupled dynamics driven by a shared Brownian motion.
//!
//! ```text
//! dX_i = 𝖻_i u_i dt + σ_i dW^i + dW⁰
//! f_i  = ½ [ Q̂_i (x_i − x̄)² + Q̄_i x̄² + R_i u_i² ],   g_i = ½ [ G_i (x_i − x̄)² + Ḡ_i x̄² ]
//! ```
//!
//! The dynamics do not depend on the state, so the players interact only
//! through the costs and the common noise. With identical cost weights the
//! game is an exact potential game.

use crate::app::presets::{require, AffineCoefficient, PlayerParam, QuadraticCost};
use crate::error::Result;
use crate::model::{ConstantLedger, GameSpec, InitialLaw};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Parameters of the common-noise preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommonNoiseParams {
    pub b: PlayerParam,
    pub sigma: PlayerParam,
    pub q_hat: PlayerParam,
    pub q_bar: PlayerParam,
    pub r: PlayerParam,
    pub g: PlayerParam,
    pub g_bar: PlayerParam,
    pub x0_mean: PlayerParam,
    pub x0_std: PlayerParam,
}

impl Default for CommonNoiseParams {
    fn default() -> Self {
        Self {
            b: 1.0.into(),
            sigma: 0.3.into(),
            q_hat: PlayerParam::Spread { lo: 0.5, hi: 1.5 },
            q_bar: 0.0.into(),
            r: 1.0.into(),
            g: PlayerParam::Spread { lo: 0.5, hi: 1.5 },
            g_bar: 0.0.into(),
            x0_mean: PlayerParam::Spread { lo: -0.5, hi: 0.5 },
            x0_std: 0.2.into(),
        }
    }
}

/// Build the common-noise game; the ledger records the control and noise
/// scales as `L^b`, `L^σ` and zero mean-field couplings.
pub fn build_common_noise_game(p: &CommonNoiseParams, n: usize, horizon: f64) -> Result<(GameSpec, ConstantLedger)> {
    let b = p.b.resolve(n, "b")?;
    let sigma = p.sigma.resolve(n, "sigma")?;
    let cost = QuadraticCost {
        q_hat: p.q_hat.resolve(n, "q_hat")?,
        q_bar: p.q_bar.resolve(n, "q_bar")?,
        r: p.r.resolve(n, "r")?,
        g: p.g.resolve(n, "g")?,
        g_bar: p.g_bar.resolve(n, "g_bar")?,
    };
    for (v, name) in [
        (&cost.q_hat, "q_hat"),
        (&cost.q_bar, "q_bar"),
        (&cost.g, "g"),
        (&cost.g_bar, "g_bar"),
    ] {
        require(v, name, "≥ 0", |x| x >= 0.0)?;
    }
    require(&cost.r, "r", "> 0", |x| x > 0.0)?;
    let x0_std = p.x0_std.resolve(n, "x0_std")?;
    require(&x0_std, "x0_std", "≥ 0", |x| x >= 0.0)?;
    let maxabs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut ledger = ConstantLedger::new(n, maxabs(&b), 0.0, maxabs(&sigma), 0.0);
    ledger.gaps = cost.gap_table(n);
    let zeros = vec![0.0; n];
    let cost = Arc::new(cost);
    let spec = GameSpec {
        name: "common_noise".into(),
        n_players: n,
        horizon,
        initial: InitialLaw::gaussian(p.x0_mean.resolve(n, "x0_mean")?, x0_std),
        drift: Arc::new(AffineCoefficient {
            kx: zeros.clone(),
            ky: zeros.clone(),
            ku: b,
            c: zeros,
        }),
        diffusion: Arc::new(AffineCoefficient::constant(sigma)),
        running: cost.clone(),
        terminal: cost,
        common_noise: true,
    };
    Ok((spec, ledger))
}
