// SPDX-License-Identifier: MIT OR Apache-2.0

//! Deterministic parallel reductions and Monte Carlo estimators.
//!
//! Every Monte Carlo average in the crate is computed over fixed-size path
//! chunks. Chunks are processed in parallel, their partial results are
//! collected in chunk order, and the partials are merged sequentially. The
//! reduction tree therefore depends only on the number of paths, never on the
//! number of worker threads, which makes every reported number bit-identical
//! across thread counts.
//!
//! Running moments use the pairwise merge of Chan, Golub and LeVeque:
//!
//! ```text
//! n = n_a + n_b,  δ = m_b − m_a
//! m = m_a + δ·n_b/n
//! M2 = M2_a + M2_b + δ²·n_a·n_b/n
//! SE = sqrt(M2 / (n − 1) / n)
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::ops::Range;

/// Number of paths processed by one parallel work item.
pub const PATH_CHUNK: usize = 256;

/// Apply `f` to consecutive path ranges of length [`PATH_CHUNK`] in parallel
/// and return the per-chunk results in chunk order.
pub fn par_chunks<T, F>(n_paths: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    let n_chunks = n_paths.div_ceil(PATH_CHUNK);
    (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * PATH_CHUNK;
            let hi = ((c + 1) * PATH_CHUNK).min(n_paths);
            f(lo..hi)
        })
        .collect()
}

/// A point estimate with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn new(value: f64, se: f64) -> Self {
        Self { value, se }
    }

    /// Exact (zero-variance) value.
    pub fn exact(value: f64) -> Self {
        Self { value, se: 0.0 }
    }
}

/// Streaming mean/variance accumulator (count, mean, sum of squared deviations).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    /// Add one observation (Welford update).
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Merge another accumulator into this one.
    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let nb = other.n as f64 / n as f64;
        self.mean += delta * nb;
        self.m2 += other.m2 + delta * delta * self.n as f64 * nb;
        self.n = n;
    }

    /// Sample variance (unbiased); zero for fewer than two observations.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    /// Standard error of the mean.
    pub fn se(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate::new(self.mean, self.se())
    }
}

/// Vector of accumulators, one per output channel.
#[derive(Debug, Clone, Default)]
pub struct MomentVec {
    pub channels: Vec<Moments>,
}

impl MomentVec {
    pub fn zeros(n: usize) -> Self {
        Self {
            channels: vec![Moments::default(); n],
        }
    }

    #[inline]
    pub fn push_row(&mut self, row: &[f64]) {
        for (c, &x) in self.channels.iter_mut().zip(row) {
            c.push(x);
        }
    }

    pub fn merge(&mut self, other: &MomentVec) {
        for (a, b) in self.channels.iter_mut().zip(&other.channels) {
            a.merge(b);
        }
    }

    pub fn estimates(&self) -> Vec<Estimate> {
        self.channels.iter().map(Moments::estimate).collect()
    }

    /// Merge chunk partials in order.
    pub fn fold(parts: Vec<MomentVec>, n: usize) -> MomentVec {
        let mut acc = MomentVec::zeros(n);
        for p in &parts {
            acc.merge(p);
        }
        acc
    }
}

/// Mean and standard error of a slice of pathwise samples, reduced with the
/// same chunk topology as the parallel passes.
pub fn mean_se(samples: &[f64]) -> Estimate {
    let mut acc = Moments::default();
    for chunk in samples.chunks(PATH_CHUNK) {
        let mut m = Moments::default();
        for &x in chunk {
            m.push(x);
        }
        acc.merge(&m);
    }
    acc.estimate()
}

/// Pathwise samples of a scalar estimator; keeps the sample vector so that
/// estimators built on common random numbers can be combined path by path.
#[derive(Debug, Clone, Default)]
pub struct Samples {
    pub values: Vec<f64>,
}

impl Samples {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn estimate(&self) -> Estimate {
        mean_se(&self.values)
    }

    /// Pathwise linear combination `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Samples, b: f64) -> Samples {
        assert_eq!(self.values.len(), other.values.len());
        Samples::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        )
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_matches_direct() {
        let xs: Vec<f64> = (0..1000).map(|k| ((k * 37) % 101) as f64 * 0.1).collect();
        let mut direct = Moments::default();
        for &x in &xs {
            direct.push(x);
        }
        let est = mean_se(&xs);
        assert!((est.value - direct.mean).abs() < 1e-12);
        assert!((est.se - direct.se()).abs() < 1e-12);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [2.0, 4.0, 8.0, 16.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-1.0)).collect();
        assert!((log_log_slope(&x, &y) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn par_chunks_ordered() {
        let v = par_chunks(1000, |r| r.start);
        assert_eq!(v, (0..4).map(|c| c * PATH_CHUNK).collect::<Vec<_>>());
    }
}
