// SPDX-License-Identifier: MIT OR Apache-2.0

//! Cost functionals on a simulated ensemble.
//!
//! ```text
//! V_i ≈ mean_p [ Σ_k f_i(t_k, X_k, u_k) dt + g_i(X_M) ]
//! ```

use crate::error::{Error, Result};
use crate::model::GameSpec;
use crate::sim::PathEnsemble;
use crate::stats::{par_chunks, Estimate, MomentVec};

/// Per-player cost estimate with standard error.
pub fn cost_value(spec: &GameSpec, ens: &PathEnsemble) -> Result<Vec<Estimate>> {
    let n = spec.n_players;
    if ens.n_players != n {
        return Err(Error::Mismatch(format!(
            "ensemble has {} players, game {}",
            ens.n_players, n
        )));
    }
    let grid = ens.grid;
    let parts = par_chunks(ens.n_paths, |range| {
        let mut acc = MomentVec::zeros(n);
        let mut c = vec![0.0; n];
        for p in range {
            c.fill(0.0);
            for k in 0..grid.n_steps {
                let (x, u, t) = (ens.x(p, k), ens.u(p, k), grid.t(k));
                for (i, ci) in c.iter_mut().enumerate() {
                    *ci += spec.running.value(i, t, x, u) * grid.dt;
                }
            }
            let x = ens.x(p, grid.n_steps);
            for (i, ci) in c.iter_mut().enumerate() {
                *ci += spec.terminal.value(i, x);
            }
            acc.push_row(&c);
        }
        acc
    });
    let est = MomentVec::fold(parts, n).estimates();
    for (i, e) in est.iter().enumerate() {
        if !e.value.is_finite() {
            return Err(Error::NonFinite {
                what: "cost functional".into(),
                player: i,
                point: "ensemble mean".into(),
            });
        }
    }
    Ok(est)
}
