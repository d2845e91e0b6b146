// SPDX-License-Identifier: MIT OR Apache-2.0

//! Counter-based Gaussian noise shared by every simulation of an experiment.
//!
//! Path `p` owns its own ChaCha8 stream (stream id `p`); initial-condition
//! normals live on stream `p | 2^63`. Each standard normal consumes exactly
//! two 64-bit outputs through the cosine branch of Box–Muller,
//!
//! ```text
//! u1 = ((w1 >> 11) + 1)·2^-53 ∈ (0, 1],   u2 = (w2 >> 11)·2^-53 ∈ [0, 1)
//! z  = sqrt(−2 ln u1)·cos(2π u2)
//! ```
//!
//! so normal number `n` of a stream starts at 32-bit word offset `4n`. Any
//! increment can therefore be regenerated from `(seed, path, step, driver)`
//! alone, independent of how paths are scheduled on threads. Increments are
//! ordered step-major, driver-minor and scaled by `sqrt(dt)`.

use crate::error::{Error, Result};
use crate::model::grid::TimeGrid;
use crate::stats::par_chunks;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const INITIAL_STREAM_FLAG: u64 = 1 << 63;

#[inline]
fn box_muller(w1: u64, w2: u64) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let u1 = ((w1 >> 11) + 1) as f64 * SCALE;
    let u2 = (w2 >> 11) as f64 * SCALE;
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[inline]
fn next_normal(rng: &mut ChaCha8Rng) -> f64 {
    let w1 = rng.next_u64();
    let w2 = rng.next_u64();
    box_muller(w1, w2)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Standard normal number `index` of the increment stream of `path`,
/// generated by random access (no sequential state).
pub fn increment_normal_at(seed: u64, path: usize, index: u64) -> f64 {
    let mut rng = stream(seed, path as u64);
    rng.set_word_pos(4 * index as u128);
    next_normal(&mut rng)
}

/// Brownian increments `[path × step × driver]` and initial normals
/// `[path × player]` for one experiment.
#[derive(Debug, Clone)]
pub struct NoiseBundle {
    pub seed: u64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub n_drivers: usize,
    pub n_players: usize,
    pub dt: f64,
    increments: Vec<f64>,
    initial: Vec<f64>,
}

impl NoiseBundle {
    /// Generate the bundle; `n_drivers` is `N` or `N + 1` with common noise.
    pub fn generate(seed: u64, n_paths: usize, grid: &TimeGrid, n_players: usize, n_drivers: usize) -> Result<Self> {
        if n_paths == 0 || n_drivers == 0 {
            return Err(Error::InvalidParameters(
                "noise bundle needs at least one path and one driver".into(),
            ));
        }
        let m = grid.n_steps;
        let sqdt = grid.dt.sqrt();
        let per_path = m * n_drivers;
        let parts = par_chunks(n_paths, |range| {
            let mut inc = Vec::with_capacity(range.len() * per_path);
            let mut ini = Vec::with_capacity(range.len() * n_players);
            for p in range {
                let mut rng = stream(seed, p as u64);
                for _ in 0..per_path {
                    inc.push(sqdt * next_normal(&mut rng));
                }
                let mut rng0 = stream(seed, p as u64 | INITIAL_STREAM_FLAG);
                for _ in 0..n_players {
                    ini.push(next_normal(&mut rng0));
                }
            }
            (inc, ini)
        });
        let mut increments = Vec::with_capacity(n_paths * per_path);
        let mut initial = Vec::with_capacity(n_paths * n_players);
        for (a, b) in parts {
            increments.extend_from_slice(&a);
            initial.extend_from_slice(&b);
        }
        Ok(Self {
            seed,
            n_paths,
            n_steps: m,
            n_drivers,
            n_players,
            dt: grid.dt,
            increments,
            initial,
        })
    }

    /// Increments of all drivers over step `k` of path `p`.
    #[inline]
    pub fn dw(&self, p: usize, k: usize) -> &[f64] {
        let off = (p * self.n_steps + k) * self.n_drivers;
        &self.increments[off..off + self.n_drivers]
    }

    /// All increments of path `p`, step-major.
    #[inline]
    pub fn path(&self, p: usize) -> &[f64] {
        let len = self.n_steps * self.n_drivers;
        &self.increments[p * len..(p + 1) * len]
    }

    /// Initial standard normals of path `p` (one per player).
    #[inline]
    pub fn initial(&self, p: usize) -> &[f64] {
        &self.initial[p * self.n_players..(p + 1) * self.n_players]
    }

    /// Copy with every increment at steps `≥ k` set to zero.
    pub fn truncated_after(&self, k: usize) -> Self {
        let mut out = self.clone();
        for p in 0..self.n_paths {
            for s in k..self.n_steps {
                let off = (p * self.n_steps + s) * self.n_drivers;
                out.increments[off..off + self.n_drivers].fill(0.0);
            }
        }
        out
    }

    /// Check that this bundle can drive a simulation on `grid` with `n_drivers`.
    pub fn check_compatible(&self, grid: &TimeGrid, n_drivers: usize) -> Result<()> {
        if self.n_steps != grid.n_steps || self.dt != grid.dt || self.n_drivers != n_drivers {
            return Err(Error::Mismatch(format!(
                "noise ({} steps, dt {}, {} drivers) vs grid ({} steps, dt {}, {} drivers)",
                self.n_steps, self.dt, self.n_drivers, grid.n_steps, grid.dt, n_drivers
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_access_matches_bundle() {
        let g = TimeGrid::new(1.0, 7).unwrap();
        let nb = NoiseBundle::generate(11, 5, &g, 2, 3).unwrap();
        let sq = g.dt.sqrt();
        for p in 0..5 {
            for k in 0..7 {
                for j in 0..3 {
                    let idx = (k * 3 + j) as u64;
                    let z = increment_normal_at(11, p, idx);
                    assert_eq!(nb.dw(p, k)[j], sq * z);
                }
            }
        }
    }

    #[test]
    fn truncation_zeroes_future() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let nb = NoiseBundle::generate(3, 2, &g, 1, 1).unwrap().truncated_after(2);
        assert_ne!(nb.dw(0, 1)[0], 0.0);
        assert_eq!(nb.dw(0, 2)[0], 0.0);
        assert_eq!(nb.dw(1, 3)[0], 0.0);
    }
}
