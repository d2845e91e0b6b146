// SPDX-License-Identifier: MIT OR Apache-2.0

//! Euler–Maruyama simulation of the controlled state system.
//!
//! ```text
//! X_{k+1,i} = X_{k,i} + b_i(t_k, X_{k,i}, X_k, u_{k,i}) dt
//!                     + σ_i(t_k, X_{k,i}, X_k, u_{k,i}) ΔW^i_k  (+ ΔW^0_k)
//! ```
//!
//! Controls are evaluated at `t_k` from the Brownian path strictly before
//! step `k`, so simulated states are adapted by construction.

use crate::error::{Error, Result};
use crate::model::controls::TabulatedProfile;
use crate::model::{ControlProfile, GameSpec, NoiseBundle, TimeGrid};
use crate::stats::{par_chunks, MomentVec, Samples};
use std::io::Write;

/// Simulated states and realized controls on every node.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub n_players: usize,
    pub seed: u64,
    /// `[path][node][player]`, `M + 1` nodes.
    pub states: Vec<f64>,
    /// `[path][node][player]`.
    pub controls: Vec<f64>,
}

impl PathEnsemble {
    #[inline]
    pub fn x(&self, p: usize, k: usize) -> &[f64] {
        let n = self.n_players;
        let off = (p * (self.grid.n_steps + 1) + k) * n;
        &self.states[off..off + n]
    }

    #[inline]
    pub fn u(&self, p: usize, k: usize) -> &[f64] {
        let n = self.n_players;
        let off = (p * (self.grid.n_steps + 1) + k) * n;
        &self.controls[off..off + n]
    }

    /// Confirm that `noise` is the bundle this ensemble was simulated with.
    pub fn check_noise(&self, noise: &NoiseBundle) -> Result<()> {
        if noise.seed != self.seed || noise.n_paths != self.n_paths || noise.n_steps != self.grid.n_steps {
            return Err(Error::Mismatch(format!(
                "ensemble (seed {}, {} paths, {} steps) vs noise (seed {}, {} paths, {} steps)",
                self.seed, self.n_paths, self.grid.n_steps, noise.seed, noise.n_paths, noise.n_steps
            )));
        }
        Ok(())
    }

    /// Write `path, t, X_1..X_N` rows for the first `max_paths` paths.
    pub fn write_csv<W: Write>(&self, w: W, max_paths: usize) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["path".to_string(), "t".to_string()];
        header.extend((0..self.n_players).map(|i| format!("X_{}", i + 1)));
        wr.write_record(&header)?;
        for p in 0..self.n_paths.min(max_paths) {
            for k in 0..=self.grid.n_steps {
                let mut row = vec![p.to_string(), format!("{}", self.grid.t(k))];
                row.extend(self.x(p, k).iter().map(|v| format!("{v}")));
                wr.write_record(&row)?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

/// Simulate one path, calling `visit(k, x_k, u_k)` on every node `k = 0..=M`.
#[inline]
pub(crate) fn run_path<F>(
    spec: &GameSpec,
    tab: &TabulatedProfile,
    grid: &TimeGrid,
    noise: &NoiseBundle,
    p: usize,
    mut visit: F,
) -> Result<()>
where
    F: FnMut(usize, &[f64], &[f64]),
{
    let n = spec.n_players;
    let nd = noise.n_drivers;
    let mut x = vec![0.0; n];
    let mut xn = vec![0.0; n];
    let mut u = vec![0.0; n];
    let mut w = vec![0.0; nd];
    let mut bv = vec![0.0; n];
    let mut sv = vec![0.0; n];
    spec.initial.sample(noise.initial(p), &mut x);
    let dt = grid.dt;
    for k in 0..grid.n_steps {
        tab.eval(k, &w, &mut u);
        visit(k, &x, &u);
        let t = grid.t(k);
        let dw = noise.dw(p, k);
        spec.drift.values(t, &x, &u, &mut bv);
        spec.diffusion.values(t, &x, &u, &mut sv);
        for i in 0..n {
            let mut v = x[i] + bv[i] * dt + sv[i] * dw[i];
            if spec.common_noise {
                v += dw[n];
            }
            if !v.is_finite() {
                return Err(Error::NonFiniteState {
                    path: p,
                    step: k + 1,
                    player: i,
                });
            }
            xn[i] = v;
        }
        std::mem::swap(&mut x, &mut xn);
        for (wj, d) in w.iter_mut().zip(dw) {
            *wj += d;
        }
    }
    tab.eval(grid.n_steps, &w, &mut u);
    visit(grid.n_steps, &x, &u);
    Ok(())
}

fn first_error<T>(parts: Vec<Result<T>>) -> Result<Vec<T>> {
    parts.into_iter().collect()
}

/// Simulate the state ensemble for `controls` on `noise`.
pub fn simulate_paths(
    spec: &GameSpec,
    controls: &ControlProfile,
    grid: &TimeGrid,
    noise: &NoiseBundle,
) -> Result<PathEnsemble> {
    let n = spec.n_players;
    if controls.n_players() != n {
        return Err(Error::Mismatch(format!(
            "{} controls for {} players",
            controls.n_players(),
            n
        )));
    }
    noise.check_compatible(grid, spec.n_drivers())?;
    let tab = controls.tabulate(grid);
    let nodes = grid.n_steps + 1;
    let parts = par_chunks(noise.n_paths, |range| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut xs = Vec::with_capacity(range.len() * nodes * n);
        let mut us = Vec::with_capacity(range.len() * nodes * n);
        for p in range {
            run_path(spec, &tab, grid, noise, p, |_, x, u| {
                xs.extend_from_slice(x);
                us.extend_from_slice(u);
            })?;
        }
        Ok((xs, us))
    });
    let parts = first_error(parts)?;
    let mut states = Vec::with_capacity(noise.n_paths * nodes * n);
    let mut ctrl = Vec::with_capacity(noise.n_paths * nodes * n);
    for (a, b) in parts {
        states.extend_from_slice(&a);
        ctrl.extend_from_slice(&b);
    }
    Ok(PathEnsemble {
        grid: *grid,
        n_paths: noise.n_paths,
        n_players: n,
        seed: noise.seed,
        states,
        controls: ctrl,
    })
}

/// Pathwise cost of every player along one path (left-endpoint quadrature).
fn path_costs(
    spec: &GameSpec,
    tab: &TabulatedProfile,
    grid: &TimeGrid,
    noise: &NoiseBundle,
    p: usize,
    out: &mut [f64],
) -> Result<()> {
    let n = spec.n_players;
    out.fill(0.0);
    let dt = grid.dt;
    let mut v = vec![0.0; n];
    run_path(spec, tab, grid, noise, p, |k, x, u| {
        if k < grid.n_steps {
            spec.running.values(grid.t(k), x, u, &mut v);
            for i in 0..n {
                out[i] += v[i] * dt;
            }
        } else {
            spec.terminal.values(x, &mut v);
            for i in 0..n {
                out[i] += v[i];
            }
        }
    })
}

/// Simulate several control profiles on common random numbers and reduce
/// their pathwise costs with `combine(costs[profile·N + i], out)`.
///
/// Returns running moments of the `n_out` combined channels.
pub fn cost_pass<F>(
    spec: &GameSpec,
    profiles: &[ControlProfile],
    grid: &TimeGrid,
    noise: &NoiseBundle,
    n_out: usize,
    combine: F,
) -> Result<MomentVec>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    noise.check_compatible(grid, spec.n_drivers())?;
    let n = spec.n_players;
    let tabs: Vec<TabulatedProfile> = profiles.iter().map(|c| c.tabulate(grid)).collect();
    let parts = par_chunks(noise.n_paths, |range| -> Result<MomentVec> {
        let mut acc = MomentVec::zeros(n_out);
        let mut costs = vec![0.0; tabs.len() * n];
        let mut out = vec![0.0; n_out];
        for p in range {
            for (q, tab) in tabs.iter().enumerate() {
                path_costs(spec, tab, grid, noise, p, &mut costs[q * n..(q + 1) * n])?;
            }
            out.fill(0.0);
            combine(&costs, &mut out);
            acc.push_row(&out);
        }
        Ok(acc)
    });
    Ok(MomentVec::fold(first_error(parts)?, n_out))
}

/// Pathwise costs `[player] → samples` for one profile.
pub fn pathwise_costs(
    spec: &GameSpec,
    controls: &ControlProfile,
    grid: &TimeGrid,
    noise: &NoiseBundle,
) -> Result<Vec<Samples>> {
    noise.check_compatible(grid, spec.n_drivers())?;
    let n = spec.n_players;
    let tab = controls.tabulate(grid);
    let parts = par_chunks(noise.n_paths, |range| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(range.len() * n);
        let mut c = vec![0.0; n];
        for p in range {
            path_costs(spec, &tab, grid, noise, p, &mut c)?;
            out.extend_from_slice(&c);
        }
        Ok(out)
    });
    let flat: Vec<f64> = first_error(parts)?.concat();
    Ok((0..n)
        .map(|i| Samples::new(flat.iter().skip(i).step_by(n).copied().collect()))
        .collect())
}
