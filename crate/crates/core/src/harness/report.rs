use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One statistic. `tolerance` and `pass` are absent for informational rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub horizon: f64,
    pub coord: Option<usize>,
    pub stat_name: String,
    pub value: f64,
    pub tolerance: Option<f64>,
    pub pass: Option<bool>,
}

impl ReportRow {
    pub fn info(horizon: f64, coord: Option<usize>, name: impl Into<String>, value: f64) -> Self {
        Self {
            horizon,
            coord,
            stat_name: name.into(),
            value,
            tolerance: None,
            pass: None,
        }
    }

    /// Passes when `value <= tolerance`.
    pub fn at_most(horizon: f64, coord: Option<usize>, name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            pass: Some(value <= tolerance),
            tolerance: Some(tolerance),
            ..Self::info(horizon, coord, name, value)
        }
    }

    /// Passes when `value >= tolerance`.
    pub fn at_least(horizon: f64, coord: Option<usize>, name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            pass: Some(value >= tolerance),
            tolerance: Some(tolerance),
            ..Self::info(horizon, coord, name, value)
        }
    }

    /// Passes when `value > tolerance`.
    pub fn above(horizon: f64, coord: Option<usize>, name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            pass: Some(value > tolerance),
            tolerance: Some(tolerance),
            ..Self::info(horizon, coord, name, value)
        }
    }

    pub fn flag(horizon: f64, coord: Option<usize>, name: impl Into<String>, ok: bool) -> Self {
        Self {
            pass: Some(ok),
            ..Self::info(horizon, coord, name, if ok { 1.0 } else { 0.0 })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: String,
    pub config: serde_json::Value,
    pub rows: Vec<ReportRow>,
    pub passed: bool,
    pub notes: Vec<String>,
    pub wall_clock_seconds: f64,
}

impl ExperimentReport {
    pub fn new(kind: &str, config: serde_json::Value) -> Self {
        Self {
            kind: kind.to_string(),
            config,
            rows: Vec::new(),
            passed: true,
            notes: Vec::new(),
            wall_clock_seconds: 0.0,
        }
    }

    pub fn push(&mut self, row: ReportRow) {
        if row.pass == Some(false) {
            self.passed = false;
        }
        self.rows.push(row);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn find(&self, name: &str) -> impl Iterator<Item = &ReportRow> {
        let name = name.to_string();
        self.rows.iter().filter(move |r| r.stat_name == name)
    }

    /// Rows that carry a verdict and failed.
    pub fn failures(&self) -> Vec<&ReportRow> {
        self.rows.iter().filter(|r| r.pass == Some(false)).collect()
    }

    /// Equality ignoring the wall-clock time.
    pub fn same_results(&self, other: &Self) -> bool {
        Self {
            wall_clock_seconds: 0.0,
            ..self.clone()
        } == Self {
            wall_clock_seconds: 0.0,
            ..other.clone()
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("horizon,coord,stat_name,value,tolerance,pass\n");
        for r in &self.rows {
            let opt = |v: Option<String>| v.unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.horizon,
                opt(r.coord.map(|c| c.to_string())),
                r.stat_name,
                r.value,
                opt(r.tolerance.map(|t| t.to_string())),
                opt(r.pass.map(|p| p.to_string())),
            );
        }
        out
    }
}

/// Writes `<stem>.json` and `<stem>.csv` next to `path` and returns both
/// paths. Any extension on `path` is replaced.
pub fn emit_report(report: &ExperimentReport, path: &Path) -> Result<(PathBuf, PathBuf)> {
    let json_path = path.with_extension("json");
    let csv_path = path.with_extension("csv");
    if let Some(dir) = json_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    fs::write(&json_path, text)?;
    fs::write(&csv_path, report.to_csv())?;
    Ok((json_path, csv_path))
}
