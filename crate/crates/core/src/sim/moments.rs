// SPDX-License-Identifier: MIT OR Apache-2.0

//! Empirical sup-over-grid moments.
//!
//! ```text
//! m̂_p = max_k  (1/P) Σ_paths |X_{t_k,i}|^p
//! ```
//!
//! The reported standard error is that of the maximizing node.

use crate::error::{Error, Result};
use crate::sim::paths::PathEnsemble;
use crate::sim::sensitivity::SensitivityEnsemble;
use crate::stats::{par_chunks, Estimate, MomentVec};

fn sup_moment<F>(n_paths: usize, nodes: usize, p: f64, value: F) -> Result<Estimate>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    if p < 1.0 {
        return Err(Error::InvalidParameters(format!("moment order must be ≥ 1, got {p}")));
    }
    let parts = par_chunks(n_paths, |range| {
        let mut acc = MomentVec::zeros(nodes);
        let mut row = vec![0.0; nodes];
        for path in range {
            for (k, r) in row.iter_mut().enumerate() {
                *r = value(path, k).abs().powf(p);
            }
            acc.push_row(&row);
        }
        acc
    });
    let acc = MomentVec::fold(parts, nodes);
    let best = acc
        .estimates()
        .into_iter()
        .fold(Estimate::new(0.0, 0.0), |b, e| if e.value > b.value { e } else { b });
    Ok(best)
}

/// `sup_k E|X_{t_k,i}|^p` with the standard error at the maximizing node.
pub fn empirical_moment(ens: &PathEnsemble, i: usize, p: f64) -> Result<Estimate> {
    sup_moment(ens.n_paths, ens.grid.n_steps + 1, p, |path, k| ens.x(path, k)[i])
}

/// `sup_k E|Y_{t_k,i}|^p` for a tangent process.
pub fn sensitivity_moment(y: &SensitivityEnsemble, i: usize, p: f64) -> Result<Estimate> {
    let n_paths = y.values.len() / ((y.n_steps + 1) * y.n_players);
    sup_moment(n_paths, y.n_steps + 1, p, |path, k| y.y(path, k)[i])
}
