// SPDX-License-Identifier: MIT OR Apache-2.0

//! Acceptance run: prints one `PASS`/`FAIL` line per numbered check.
//!
//! `ACCEPTANCE_ONLY=1,4,7` restricts the run to the listed checks and
//! `ACCEPTANCE_SCALE=smoke` switches to the reduced problem sizes.

use alpha_games::app::checks::{run_check, Scale};

fn main() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let scale = match std::env::var("ACCEPTANCE_SCALE").as_deref() {
        Ok("smoke") => Scale::Smoke,
        _ => Scale::Full,
    };
    let seed = 20_240_601;
    let mut failures = 0;
    for id in 1..=12 {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        match run_check(id, scale, seed) {
            Ok(c) => {
                let budget = c
                    .budget_seconds
                    .map(|b| format!(", budget {b:.0} s"))
                    .unwrap_or_default();
                println!(
                    "{} criterion {id}: {} — {} [{:.1} s{budget}]",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.title,
                    c.summary,
                    c.seconds
                );
                failures += usize::from(!c.passed);
            }
            Err(e) => {
                println!("FAIL criterion {id}: error: {e}");
                failures += 1;
            }
        }
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
