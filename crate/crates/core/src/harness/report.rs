//! Experiment reports, verdicts and their CSV/JSON persistence.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::McEstimate;
use crate::harness::config::HarnessConfig;

/// Build identifier baked in at compile time.
pub const BUILD_ID: &str = env!("REVUZ_BUILD_ID");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Cell {
    Mc { mean: f64, std_error: f64, n: u64 },
    Quad { value: f64, tol: f64 },
    Exact { value: f64 },
}

impl Cell {
    pub fn value(&self) -> f64 {
        match *self {
            Cell::Mc { mean, .. } => mean,
            Cell::Quad { value, .. } | Cell::Exact { value } => value,
        }
    }

    /// Standard error, quadrature tolerance, or zero.
    pub fn uncertainty(&self) -> f64 {
        match *self {
            Cell::Mc { std_error, .. } => std_error,
            Cell::Quad { tol, .. } => tol,
            Cell::Exact { .. } => 0.0,
        }
    }
}

impl From<McEstimate> for Cell {
    fn from(e: McEstimate) -> Self {
        Cell::Mc {
            mean: e.mean,
            std_error: e.std_error,
            n: e.n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    /// Family or table the row belongs to.
    pub label: String,
    /// Sequence index; `None` for the limit.
    pub n: Option<u32>,
    pub cells: Vec<(String, Cell)>,
}

impl Row {
    pub fn new(label: &str, n: Option<u32>) -> Self {
        Self {
            label: label.to_string(),
            n,
            cells: Vec::new(),
        }
    }

    pub fn with(mut self, name: &str, cell: impl Into<Cell>) -> Self {
        self.cells.push((name.to_string(), cell.into()));
        self
    }

    pub fn get(&self, name: &str) -> Option<&Cell> {
        self.cells.iter().find(|(k, _)| k == name).map(|(_, c)| c)
    }
}

/// Rows of `label` that carry column `name`, in order.
pub fn column<'a>(rows: &'a [Row], label: &str, name: &str) -> Vec<(Option<u32>, &'a Cell)> {
    rows.iter()
        .filter(|r| r.label == label)
        .filter_map(|r| r.get(name).map(|c| (r.n, c)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    /// A predicted non-convergence was observed.
    ExpectedGap,
    Fail,
    /// The check could not be evaluated.
    Inconclusive,
}

impl Verdict {
    pub fn is_ok(self) -> bool {
        matches!(self, Verdict::Pass | Verdict::ExpectedGap)
    }

    pub fn from_bool(ok: bool, on_ok: Verdict) -> Verdict {
        if ok {
            on_ok
        } else {
            Verdict::Fail
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::ExpectedGap => "expected-gap",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, verdict: Verdict, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            verdict,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub build: String,
    pub crate_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub parameters: HarnessConfig,
    pub rows: Vec<Row>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub provenance: Provenance,
}

impl ExperimentReport {
    pub fn new(experiment: &str, cfg: &HarnessConfig) -> Self {
        Self {
            experiment: experiment.to_string(),
            parameters: cfg.clone(),
            rows: Vec::new(),
            checks: Vec::new(),
            notes: Vec::new(),
            provenance: Provenance {
                seed: cfg.seed,
                build: BUILD_ID.to_string(),
                crate_version: env!("CARGO_PKG_VERSION").to_string(),
            },
        }
    }

    /// All checks passed or showed their expected gap.
    pub fn ok(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.verdict.is_ok())
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Column names in order of first appearance.
    fn columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = Vec::new();
        for r in &self.rows {
            for (k, _) in &r.cells {
                if !cols.contains(k) {
                    cols.push(k.clone());
                }
            }
        }
        cols
    }

    /// One row per table row; each column `c` has a companion `c_err` holding
    /// the standard error or quadrature tolerance.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let cols = self.columns();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["label".to_string(), "n".to_string()];
        for c in &cols {
            header.push(c.clone());
            header.push(format!("{c}_err"));
        }
        w.write_record(&header).map_err(csv_err)?;
        for r in &self.rows {
            let mut rec = vec![r.label.clone(), r.n.map_or("inf".to_string(), |n| n.to_string())];
            for c in &cols {
                match r.get(c) {
                    Some(cell) => {
                        rec.push(format!("{:e}", cell.value()));
                        rec.push(format!("{:e}", cell.uncertainty()));
                    }
                    None => rec.extend([String::new(), String::new()]),
                }
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `<dir>/<experiment>.csv` and `<dir>/<experiment>.json`.
    pub fn save(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("{}.csv", self.experiment));
        let json_path = dir.join(format!("{}.json", self.experiment));
        self.write_csv(std::fs::File::create(&csv_path)?)?;
        std::fs::write(&json_path, serde_json::to_string_pretty(self)?)?;
        Ok((csv_path, json_path))
    }

    pub fn summary(&self) -> String {
        let mut s = format!("{}: {}\n", self.experiment, if self.ok() { "ok" } else { "NOT OK" });
        for c in &self.checks {
            s.push_str(&format!("  {:<28} {:<13} {}\n", c.name, c.verdict, c.detail));
        }
        for n in &self.notes {
            s.push_str(&format!("  note: {n}\n"));
        }
        s
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> ExperimentReport {
        let mut r = ExperimentReport::new("demo", &HarnessConfig::default());
        r.rows
            .push(Row::new("a", Some(1)).with("x", Cell::Exact { value: 1.5 }));
        r.rows.push(
            Row::new("a", None)
                .with("x", Cell::Quad { value: 2.0, tol: 1e-9 })
                .with(
                    "y",
                    Cell::Mc {
                        mean: 0.5,
                        std_error: 0.1,
                        n: 10,
                    },
                ),
        );
        r
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        report().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "label,n,x,x_err,y,y_err");
        assert_eq!(lines[1], "a,1,1.5e0,0e0,,");
        assert_eq!(lines[2], "a,inf,2e0,1e-9,5e-1,1e-1");
    }

    #[test]
    fn ok_needs_checks() {
        let mut r = report();
        assert!(!r.ok());
        r.checks.push(Check::new("c", Verdict::ExpectedGap, ""));
        assert!(r.ok());
        r.checks.push(Check::new("d", Verdict::Inconclusive, ""));
        assert!(!r.ok());
    }

    #[test]
    fn json_roundtrip() {
        let r = report();
        let back: ExperimentReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
