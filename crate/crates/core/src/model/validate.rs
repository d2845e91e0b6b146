// SPDX-License-Identifier: MIT OR Apache-2.0

//! Sampled verification of a game against its constant ledger.
//!
//! Two families of checks run on a Halton point set over a user box:
//!
//! ```text
//! ratio  = sampled |partial| / ledger bound          (pass iff ≤ 1 + 1e-6)
//! consistency: |analytic − central FD| ≤ 1e-4 (1 + |analytic|),  h = 1e-5 (1 + |x|)
//! ```
//!
//! A zero bound with a zero partial counts as ratio 0; a zero bound with a
//! nonzero partial is an infinite ratio.

use crate::error::{Error, Result};
use crate::model::game::{CoefFirst, CoefSecond, CostFirst, CostSecond, GameSpec, StateCoefficient};
use crate::model::ledger::{primes, radical_inverse, ConstantLedger};
use serde::{Deserialize, Serialize};

/// Ratio tolerance for the ledger inequalities.
pub const RATIO_TOL: f64 = 1e-6;
/// Relative tolerance of the analytic-vs-FD partial check.
pub const CONSISTENCY_TOL: f64 = 1e-4;

/// Compact sampling box for `(t, state, control)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleBox {
    pub t: (f64, f64),
    pub x: (f64, f64),
    pub u: (f64, f64),
}

impl SampleBox {
    pub fn new(horizon: f64, x: f64, u: f64) -> Self {
        Self {
            t: (0.0, horizon),
            x: (-x, x),
            u: (-u, u),
        }
    }
}

/// Worst sampled ratio of one ledger inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub tag: String,
    pub player: usize,
    pub worst_ratio: f64,
    pub worst_point: String,
}

/// Worst normalized FD discrepancy of one partial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyEntry {
    pub tag: String,
    pub player: usize,
    /// `max |analytic − fd| / (1 + |analytic|)`
    pub worst_error: f64,
    pub passed: bool,
}

/// Outcome of [`validate_game`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ratios: Vec<CheckEntry>,
    pub consistency: Vec<ConsistencyEntry>,
    pub passed: bool,
}

impl ValidationReport {
    /// Largest ratio among entries whose tag starts with `prefix`.
    pub fn worst(&self, prefix: &str) -> f64 {
        self.ratios
            .iter()
            .filter(|e| e.tag.starts_with(prefix))
            .map(|e| e.worst_ratio)
            .fold(0.0, f64::max)
    }
}

struct Tracker {
    entries: Vec<CheckEntry>,
}

impl Tracker {
    fn record(&mut self, tag: &str, player: usize, value: f64, bound: f64, point: &dyn Fn() -> String) {
        let ratio = if value == 0.0 {
            0.0
        } else if bound == 0.0 {
            f64::INFINITY
        } else {
            value / bound
        };
        if let Some(e) = self.entries.iter_mut().find(|e| e.player == player && e.tag == tag) {
            if ratio > e.worst_ratio {
                e.worst_ratio = ratio;
                e.worst_point = point();
            }
        } else {
            self.entries.push(CheckEntry {
                tag: tag.to_string(),
                player,
                worst_ratio: ratio,
                worst_point: point(),
            });
        }
    }
}

struct Consistency {
    entries: Vec<ConsistencyEntry>,
}

impl Consistency {
    fn record(&mut self, tag: &str, player: usize, analytic: f64, fd: f64) {
        let err = (analytic - fd).abs() / (1.0 + analytic.abs());
        if let Some(e) = self.entries.iter_mut().find(|e| e.player == player && e.tag == tag) {
            e.worst_error = e.worst_error.max(err);
            e.passed = e.worst_error <= CONSISTENCY_TOL;
        } else {
            self.entries.push(ConsistencyEntry {
                tag: tag.to_string(),
                player,
                worst_error: err,
                passed: err <= CONSISTENCY_TOL,
            });
        }
    }
}

fn finite(v: f64, what: &str, player: usize, point: &dyn Fn() -> String) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            what: what.to_string(),
            player,
            point: point(),
        })
    }
}

#[inline]
fn step(x: f64) -> f64 {
    1e-5 * (1.0 + x.abs())
}

#[allow(clippy::too_many_arguments)]
fn check_coefficient(
    name: &str,
    c: &dyn StateCoefficient,
    l: f64,
    ly: f64,
    n: usize,
    i: usize,
    t: f64,
    x: f64,
    y: &[f64],
    u: f64,
    tr: &mut Tracker,
    cs: &mut Consistency,
) -> Result<()> {
    let nf = n as f64;
    let pt = || format!("t={t:.4}, x={x:.4}, u={u:.4}, y={y:.3?}");
    let mut f1 = CoefFirst::new(n);
    let mut f2 = CoefSecond::new(n);
    c.first(i, t, x, y, u, &mut f1);
    c.second(i, t, x, y, u, &mut f2);
    let v = finite(c.value(i, t, x, y, u), &format!("{name} value"), i, &pt)?;
    for (tag, val) in [
        ("dx", f1.dx),
        ("du", f1.du),
        ("dxx", f2.dxx),
        ("dxu", f2.dxu),
        ("duu", f2.duu),
    ] {
        finite(val, &format!("{name} {tag}"), i, &pt)?;
    }
    for val in f1.dy.iter().chain(&f2.dxy).chain(&f2.duy).chain(&f2.dyy) {
        finite(*val, &format!("{name} y-partials"), i, &pt)?;
    }
    let _ = v;
    // growth at the origin
    let zero = vec![0.0; n];
    let v0 = finite(c.value(i, t, 0.0, &zero, u), &format!("{name} value at origin"), i, &pt)?;
    tr.record(&format!("{name}:growth"), i, v0.abs(), l * (1.0 + u.abs()), &pt);
    tr.record(
        &format!("{name}:dx+du+duu"),
        i,
        f1.dx.abs() + f1.du.abs() + f2.duu.abs(),
        l,
        &pt,
    );
    tr.record(&format!("{name}:dxx+dxu"), i, f2.dxx.abs() + f2.dxu.abs(), l, &pt);
    for j in 0..n {
        tr.record(&format!("{name}:dy"), i, f1.dy[j].abs(), ly / nf, &pt);
        tr.record(
            &format!("{name}:dxy+duy"),
            i,
            f2.dxy[j].abs() + f2.duy[j].abs(),
            ly / nf,
            &pt,
        );
        for k in 0..n {
            let b = if j == k { ly / nf } else { ly / (nf * nf) };
            tr.record(&format!("{name}:dyy"), i, f2.dyy[j * n + k].abs(), b, &pt);
        }
    }
    // consistency of first partials with FD of the value
    let hx = step(x);
    let hu = step(u);
    cs.record(
        &format!("{name}:dx"),
        i,
        f1.dx,
        (c.value(i, t, x + hx, y, u) - c.value(i, t, x - hx, y, u)) / (2.0 * hx),
    );
    cs.record(
        &format!("{name}:du"),
        i,
        f1.du,
        (c.value(i, t, x, y, u + hu) - c.value(i, t, x, y, u - hu)) / (2.0 * hu),
    );
    let mut yp = y.to_vec();
    let mut fp = CoefFirst::new(n);
    let mut fm = CoefFirst::new(n);
    for j in 0..n {
        let hy = step(y[j]);
        yp[j] = y[j] + hy;
        let vp = c.value(i, t, x, &yp, u);
        c.first(i, t, x, &yp, u, &mut fp);
        yp[j] = y[j] - hy;
        let vm = c.value(i, t, x, &yp, u);
        c.first(i, t, x, &yp, u, &mut fm);
        yp[j] = y[j];
        cs.record(&format!("{name}:dy"), i, f1.dy[j], (vp - vm) / (2.0 * hy));
        cs.record(&format!("{name}:dxy"), i, f2.dxy[j], (fp.dx - fm.dx) / (2.0 * hy));
        cs.record(&format!("{name}:duy"), i, f2.duy[j], (fp.du - fm.du) / (2.0 * hy));
        for k in 0..n {
            cs.record(
                &format!("{name}:dyy"),
                i,
                f2.dyy[k * n + j],
                (fp.dy[k] - fm.dy[k]) / (2.0 * hy),
            );
        }
    }
    c.first(i, t, x + hx, y, u, &mut fp);
    c.first(i, t, x - hx, y, u, &mut fm);
    cs.record(&format!("{name}:dxx"), i, f2.dxx, (fp.dx - fm.dx) / (2.0 * hx));
    c.first(i, t, x, y, u + hu, &mut fp);
    c.first(i, t, x, y, u - hu, &mut fm);
    cs.record(&format!("{name}:dxu"), i, f2.dxu, (fp.dx - fm.dx) / (2.0 * hu));
    cs.record(&format!("{name}:duu"), i, f2.duu, (fp.du - fm.du) / (2.0 * hu));
    Ok(())
}

fn check_costs(spec: &GameSpec, i: usize, t: f64, y: &[f64], u: &[f64], cs: &mut Consistency) -> Result<()> {
    let n = spec.n_players;
    let pt = || format!("t={t:.4}, y={y:.3?}, u={u:.3?}");
    let mut f1 = CostFirst::new(n);
    let mut f2 = CostSecond::new(n);
    spec.running.first(i, t, y, u, &mut f1);
    spec.running.second(i, t, y, u, &mut f2);
    finite(spec.running.value(i, t, y, u), "running cost", i, &pt)?;
    for v in f1.dy.iter().chain(&f1.du).chain(&f2.dyy).chain(&f2.dyu).chain(&f2.duu) {
        finite(*v, "running cost partials", i, &pt)?;
    }
    let mut g1 = vec![0.0; n];
    let mut g2 = vec![0.0; n * n];
    spec.terminal.first(i, y, &mut g1);
    spec.terminal.second(i, y, &mut g2);
    finite(spec.terminal.value(i, y), "terminal cost", i, &pt)?;
    for v in g1.iter().chain(&g2) {
        finite(*v, "terminal cost partials", i, &pt)?;
    }
    let mut yp = y.to_vec();
    let mut up = u.to_vec();
    let mut fp = CostFirst::new(n);
    let mut fm = CostFirst::new(n);
    let mut gp = vec![0.0; n];
    let mut gm = vec![0.0; n];
    for j in 0..n {
        let h = step(y[j]);
        yp[j] = y[j] + h;
        let vp = spec.running.value(i, t, &yp, u);
        let wp = spec.terminal.value(i, &yp);
        spec.running.first(i, t, &yp, u, &mut fp);
        spec.terminal.first(i, &yp, &mut gp);
        yp[j] = y[j] - h;
        let vm = spec.running.value(i, t, &yp, u);
        let wm = spec.terminal.value(i, &yp);
        spec.running.first(i, t, &yp, u, &mut fm);
        spec.terminal.first(i, &yp, &mut gm);
        yp[j] = y[j];
        cs.record("f:dy", i, f1.dy[j], (vp - vm) / (2.0 * h));
        cs.record("g:dy", i, g1[j], (wp - wm) / (2.0 * h));
        for k in 0..n {
            cs.record("f:dyy", i, f2.dyy[k * n + j], (fp.dy[k] - fm.dy[k]) / (2.0 * h));
            cs.record("f:dyu", i, f2.dyu[j * n + k], (fp.du[k] - fm.du[k]) / (2.0 * h));
            cs.record("g:dyy", i, g2[k * n + j], (gp[k] - gm[k]) / (2.0 * h));
        }
        let hu = step(u[j]);
        up[j] = u[j] + hu;
        let vp = spec.running.value(i, t, y, &up);
        spec.running.first(i, t, y, &up, &mut fp);
        up[j] = u[j] - hu;
        let vm = spec.running.value(i, t, y, &up);
        spec.running.first(i, t, y, &up, &mut fm);
        up[j] = u[j];
        cs.record("f:du", i, f1.du[j], (vp - vm) / (2.0 * hu));
        for k in 0..n {
            cs.record("f:duu", i, f2.duu[k * n + j], (fp.du[k] - fm.du[k]) / (2.0 * hu));
        }
    }
    Ok(())
}

/// Check every ledger inequality and every analytic partial on `n_samples`
/// Halton points of the box.
pub fn validate_game(
    spec: &GameSpec,
    ledger: &ConstantLedger,
    bx: &SampleBox,
    n_samples: usize,
) -> Result<ValidationReport> {
    if n_samples == 0 {
        return Err(Error::InvalidParameters("validate_game needs n_samples ≥ 1".into()));
    }
    let box_ok = [bx.t.0, bx.t.1, bx.x.0, bx.x.1, bx.u.0, bx.u.1]
        .iter()
        .all(|v| v.is_finite());
    if !box_ok {
        return Err(Error::InvalidParameters("sample box must be finite".into()));
    }
    let n = spec.n_players;
    let bases = primes(2 + 2 * n);
    let mut tr = Tracker { entries: Vec::new() };
    let mut cs = Consistency { entries: Vec::new() };
    let mut y = vec![0.0; n];
    let mut uu = vec![0.0; n];
    for s in 1..=n_samples as u64 {
        let t = bx.t.0 + (bx.t.1 - bx.t.0) * radical_inverse(s, bases[0]);
        for k in 0..n {
            y[k] = bx.x.0 + (bx.x.1 - bx.x.0) * radical_inverse(s, bases[2 + k]);
            uu[k] = bx.u.0 + (bx.u.1 - bx.u.0) * radical_inverse(s, bases[2 + n + k]);
        }
        for i in 0..n {
            // The private-state argument is sampled independently of y.
            let x = bx.x.0 + (bx.x.1 - bx.x.0) * radical_inverse(s, bases[1]);
            check_coefficient(
                "b",
                spec.drift.as_ref(),
                ledger.l_b,
                ledger.l_y_b,
                n,
                i,
                t,
                x,
                &y,
                uu[i],
                &mut tr,
                &mut cs,
            )?;
            check_coefficient(
                "sigma",
                spec.diffusion.as_ref(),
                ledger.l_sigma,
                ledger.l_y_sigma,
                n,
                i,
                t,
                x,
                &y,
                uu[i],
                &mut tr,
                &mut cs,
            )?;
            check_costs(spec, i, t, &y, &uu, &mut cs)?;
        }
    }
    let passed = tr.entries.iter().all(|e| e.worst_ratio <= 1.0 + RATIO_TOL) && cs.entries.iter().all(|e| e.passed);
    Ok(ValidationReport {
        ratios: tr.entries,
        consistency: cs.entries,
        passed,
    })
}
