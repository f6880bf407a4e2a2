//! Verdict rows, measured curves and their serialization.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use onephase_core::{GridField, PotentialSpec};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{io_err, HResult};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub check: String,
    /// Descriptive tag of the statement the row tests.
    pub paper_anchor: String,
    pub hypothesis_ok: bool,
    pub margin: f64,
    pub pass: bool,
}

impl Row {
    /// Row whose verdict is `margin >= 0`.
    pub fn margin(check: impl Into<String>, anchor: &str, hypothesis_ok: bool, margin: f64) -> Self {
        Self {
            check: check.into(),
            paper_anchor: anchor.to_string(),
            hypothesis_ok,
            margin,
            pass: margin >= 0.0,
        }
    }

    /// Row whose verdict is `margin > 0`.
    pub fn strict(check: impl Into<String>, anchor: &str, hypothesis_ok: bool, margin: f64) -> Self {
        Self {
            pass: margin > 0.0,
            ..Self::margin(check, anchor, hypothesis_ok, margin)
        }
    }

    /// Counts against the exit code.
    pub fn failed(&self) -> bool {
        self.hypothesis_ok && !self.pass
    }
}

/// A measured series, written as CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Curve {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub rows: Vec<Row>,
    #[serde(skip)]
    pub curves: Vec<Curve>,
    /// Solved fields written as `<suite>_<name>.csv`.
    #[serde(skip)]
    pub fields: Vec<(String, GridField)>,
}

impl SuiteReport {
    pub fn new(suite: &str) -> Self {
        Self {
            suite: suite.to_string(),
            rows: Vec::new(),
            curves: Vec::new(),
            fields: Vec::new(),
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(|r| r.failed())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub potential: String,
    pub certification_hash: String,
    pub suites: Vec<SuiteReport>,
}

impl Report {
    pub fn new(pot: &PotentialSpec, suites: Vec<SuiteReport>) -> Self {
        Self {
            potential: pot.name.clone(),
            certification_hash: certification_hash(pot),
            suites,
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = &Row> {
        self.suites.iter().flat_map(|s| s.rows.iter())
    }

    pub fn failures(&self) -> Vec<&Row> {
        self.rows().filter(|r| r.failed()).collect()
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }

    pub fn to_json(&self) -> HResult<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Writes `report.json`, one `<suite>_<curve>.csv` per curve and one CSV
    /// per field; returns the written paths.
    pub fn write(&self, dir: &Path) -> HResult<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut written = Vec::new();
        let path = dir.join("report.json");
        std::fs::write(&path, self.to_json()?).map_err(io_err(&path))?;
        written.push(path);
        for s in &self.suites {
            for c in &s.curves {
                let path = dir.join(format!("{}_{}.csv", s.suite, c.name));
                std::fs::write(&path, c.to_csv()).map_err(io_err(&path))?;
                written.push(path);
            }
            for (name, f) in &s.fields {
                let path = dir.join(format!("{}_{name}.csv", s.suite));
                std::fs::write(&path, f.to_csv()).map_err(io_err(&path))?;
                written.push(path);
            }
        }
        Ok(written)
    }
}

/// Samples of `beta` hashed into every report.
const HASH_SAMPLES: usize = 4096;

/// SHA-256 of the potential's fingerprint and of `beta` at
/// `HASH_SAMPLES + 1` points of its support, bit for bit.
pub fn certification_hash(pot: &PotentialSpec) -> String {
    let mut hasher = Sha256::new();
    hasher.update(pot.fingerprint().as_bytes());
    for k in 0..=HASH_SAMPLES {
        let t = pot.support_right * k as f64 / HASH_SAMPLES as f64;
        hasher.update(pot.beta(t).to_bits().to_le_bytes());
    }
    hex::encode(hasher.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_separates_potentials_and_constants() {
        let p = PotentialSpec::polynomial();
        let a = certification_hash(&p);
        assert_eq!(a, certification_hash(&PotentialSpec::polynomial()));
        assert_eq!(a.len(), 64);
        assert_ne!(a, certification_hash(&PotentialSpec::bump()));
        assert_ne!(a, certification_hash(&p.clone().with_constants(0.5, 1.0, 7.0)));
    }

    #[test]
    fn out_of_hypothesis_rows_never_fail() {
        let r = Row::margin("x", "tag", false, -1.0);
        assert!(!r.pass && !r.failed());
        let r = Row::margin("x", "tag", true, 0.0);
        assert!(r.pass);
        let r = Row::strict("x", "tag", true, 0.0);
        assert!(r.failed());
    }

    #[test]
    fn curve_csv_round_trips_bits() {
        let mut c = Curve::new("c", &["a", "b"]);
        c.push(vec![0.1, 1.0 / 3.0]);
        let csv = c.to_csv();
        let line = csv.lines().nth(1).unwrap();
        let vals: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(vals, vec![0.1, 1.0 / 3.0]);
    }
}
