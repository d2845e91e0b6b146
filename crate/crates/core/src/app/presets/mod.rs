// SPDX-License-Identifier: MIT OR Apache-2.0

//! Game presets with analytic partials and auto-filled constant ledgers.
//!
//! | preset         | dynamics                                               | costs                               |
//! |----------------|--------------------------------------------------------|-------------------------------------|
//! | `lq`           | affine in (x_i, x̄, u_i), controlled diffusion          | ½[Q̂(x_i−x̄)² + Q̄x̄² + Ru²], ½[G(x_i−x̄)² + Ḡx̄²] |
//! | `mean_field`   | −a_i x + κ tanh(x̄) + B_i u, diffusion s_i + c tanh(x̄) | common core + player weights on x̄² |
//! | `common_noise` | 𝖻_i u dt + σ_i dW^i + dW⁰                              | as `lq`                             |
//! | `tanh`         | nonlinear drift and diffusion, control-dependent noise | quadratic + tanh/log-cosh couplings |
//!
//! Every preset passes [`validate_game`](crate::model::validate_game)
//! against its ledger on the default sample box.

pub mod common_noise;
pub mod lq;
pub mod mean_field;
pub mod tanh;

pub use common_noise::{build_common_noise_game, CommonNoiseParams};
pub use lq::{build_lq_game, AffineCoefficient, LqParams, QuadraticCost};
pub use mean_field::{build_mean_field_game, MeanFieldParams};
pub use tanh::{build_tanh_game, TanhParams};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A per-player parameter: one value for everyone, an explicit list, or a
/// linear spread `lo + (hi − lo)·i/(N−1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlayerParam {
    Scalar(f64),
    List(Vec<f64>),
    Spread { lo: f64, hi: f64 },
}

impl Default for PlayerParam {
    fn default() -> Self {
        PlayerParam::Scalar(0.0)
    }
}

impl From<f64> for PlayerParam {
    fn from(v: f64) -> Self {
        PlayerParam::Scalar(v)
    }
}

impl PlayerParam {
    /// Values for `n` players; `name` is used in error messages.
    pub fn resolve(&self, n: usize, name: &str) -> Result<Vec<f64>> {
        let v = match self {
            PlayerParam::Scalar(x) => vec![*x; n],
            PlayerParam::List(v) => {
                if v.len() != n {
                    return Err(Error::Config(format!(
                        "parameter `{name}` lists {} values for {n} players",
                        v.len()
                    )));
                }
                v.clone()
            }
            PlayerParam::Spread { lo, hi } => (0..n)
                .map(|i| {
                    if n == 1 {
                        0.5 * (lo + hi)
                    } else {
                        lo + (hi - lo) * i as f64 / (n - 1) as f64
                    }
                })
                .collect(),
        };
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config(format!("parameter `{name}` has non-finite values")));
        }
        Ok(v)
    }
}

/// Require every value to satisfy `pred`.
pub(crate) fn require(v: &[f64], name: &str, what: &str, pred: impl Fn(f64) -> bool) -> Result<()> {
    if let Some(bad) = v.iter().find(|x| !pred(**x)) {
        return Err(Error::Config(format!("parameter `{name}` must be {what} (got {bad})")));
    }
    Ok(())
}

#[inline]
pub(crate) fn mean(y: &[f64]) -> f64 {
    y.iter().sum::<f64>() / y.len() as f64
}

/// `tanh z = sign(z)·(1 − e)/(1 + e)` with `e = exp(−2|z|)`; absolute error
/// below 3e-16 and about three times cheaper than the libm routine, which
/// matters in the path loops.
#[inline]
pub(crate) fn th(z: f64) -> f64 {
    let e = (-2.0 * z.abs()).exp();
    ((1.0 - e) / (1.0 + e)).copysign(z)
}

/// `1 − tanh²`.
#[inline]
pub(crate) fn sech2(z: f64) -> f64 {
    let t = th(z);
    1.0 - t * t
}

/// Derivative of `sech²`: `−2 tanh · sech²`.
#[inline]
pub(crate) fn dsech2(z: f64) -> f64 {
    let t = th(z);
    -2.0 * t * (1.0 - t * t)
}

/// `log cosh z = |z| + ln(1 + e^{−2|z|}) − ln 2`, overflow-safe.
#[inline]
pub(crate) fn log_cosh(z: f64) -> f64 {
    let a = z.abs();
    a + (1.0 + (-2.0 * a).exp()).ln() - std::f64::consts::LN_2
}

/// Half-width of the state range used to validate preset ledgers.
pub const VALIDATION_X: f64 = 3.0;
/// Half-width of the control range used to validate preset ledgers.
pub const VALIDATION_U: f64 = 2.0;

/// Sample box on which every preset ledger is validated.
pub fn validation_box(horizon: f64) -> crate::model::SampleBox {
    crate::model::SampleBox::new(horizon, VALIDATION_X, VALIDATION_U)
}
