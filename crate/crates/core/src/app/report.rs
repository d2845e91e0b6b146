// SPDX-License-Identifier: MIT OR Apache-2.0

//! Run reports: `report.json` plus plot-ready `tables/*.csv`.
//!
//! ```text
//! <out>/report.json        { command, config, results, checks, passed }
//! <out>/tables/<name>.csv  UTF-8, header row, '.' decimal separator
//! ```
//!
//! Numbers are written with Rust's shortest round-trip formatting, so equal
//! floating-point values always produce identical text. Wall-clock timings
//! are not part of the report, which keeps it bit-reproducible.

use crate::error::Result;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// One acceptance check of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// A CSV table held in memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Append a row of already formatted cells.
    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(dir.join(format!("{}.csv", self.name)))?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Format a float for a CSV cell.
pub fn num(v: f64) -> String {
    format!("{v}")
}

/// Everything a subcommand produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub config: serde_json::Value,
    pub results: serde_json::Value,
    pub checks: Vec<Check>,
    pub passed: bool,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

impl Report {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            config,
            results: serde_json::Value::Null,
            checks: Vec::new(),
            passed: true,
            tables: Vec::new(),
        }
    }

    pub fn check(&mut self, c: Check) {
        self.passed &= c.passed;
        self.checks.push(c);
    }

    /// Write `report.json` and every table under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir.join("tables"))?;
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(self)? + "\n")?;
        for t in &self.tables {
            t.write(&dir.join("tables"))?;
        }
        Ok(())
    }
}
