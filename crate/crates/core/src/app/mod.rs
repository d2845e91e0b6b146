// SPDX-License-Identifier: MIT OR Apache-2.0

//! Presets, configuration, experiment runners and reports.
//!
//! - [`presets`]: ready-made games with their constant ledgers;
//! - [`config`]: the JSON run configuration and command-line overrides;
//! - [`experiments`]: reusable studies returning serializable rows;
//! - [`checks`]: the numbered acceptance checks;
//! - [`run`]: one runner per command-line subcommand;
//! - [`report`]: `report.json` and CSV tables.

pub mod checks;
pub mod config;
pub mod experiments;
pub mod presets;
pub mod report;
pub mod run;
