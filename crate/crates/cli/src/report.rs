//! Report assembly and on-disk output.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use fieldlab::stats::Estimate;
use serde::Serialize;
use serde_json::{json, Value};

use crate::RunError;

pub const SCHEMA_VERSION: &str = "fieldlab.report/1";

/// Finite floats as JSON numbers, everything else as a string tag.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

/// A deterministic numeric result (quadrature, closed form, exact algebra).
pub fn exact(x: f64) -> Value {
    json!({ "value": num(x), "uncertainty": "exact" })
}

/// A Monte Carlo result with its standard error.
pub fn estimate(e: Estimate) -> Value {
    if e.std_error == 0.0 {
        return exact(e.value);
    }
    json!({ "value": num(e.value), "std_error": num(e.std_error) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub seed: u64,
    pub version: String,
    pub wall_time_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub schema_version: String,
    pub experiment: String,
    pub parameters: BTreeMap<String, Value>,
    pub results: BTreeMap<String, Value>,
    pub verdicts: Vec<VerdictLine>,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub provenance: Provenance,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// The report with wall time zeroed: identical across reruns with one seed.
    pub fn body(&self) -> String {
        let mut r = self.clone();
        r.provenance.wall_time_seconds = 0.0;
        r.to_json()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    T(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::I(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::T(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::T(x)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::T(x.to_string())
    }
}

/// Shortest decimal that parses back to the same `f64`.
pub fn format_float(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let a = x.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.to_string(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width in {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, RunError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| RunError::Io(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            let fields: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::F(x) => format_float(*x),
                    Cell::I(i) => i.to_string(),
                    Cell::T(s) => s.clone(),
                })
                .collect();
            w.write_record(&fields).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| RunError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| RunError::Io(e.to_string()))
    }
}

/// Raw file payload, e.g. a binary trajectory and its JSON sidecar.
#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub report: ExperimentReport,
    pub tables: Vec<Table>,
    pub blobs: Vec<Blob>,
}

impl Outcome {
    /// Writes `report.json`, one `<name>.csv` per table, and the blobs into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
        let io = |p: &Path, e: std::io::Error| RunError::Io(format!("{}: {e}", p.display()));
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let mut written = Vec::new();
        let path = dir.join("report.json");
        fs::write(&path, self.report.to_json()).map_err(|e| io(&path, e))?;
        written.push(path);
        for t in &self.tables {
            let path = dir.join(format!("{}.csv", t.name));
            fs::write(&path, t.to_csv()?).map_err(|e| io(&path, e))?;
            written.push(path);
        }
        for b in &self.blobs {
            let path = dir.join(&b.name);
            fs::write(&path, &b.bytes).map_err(|e| io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 6.02e23, -2.5e-7, 0.0, 123456.789, f64::MIN_POSITIVE, f64::MAX] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(format_float(f64::NAN), "nan");
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut t = Table::new("t", &["a", "b"]);
        t.push(vec![0.5.into(), "x,y".into()]);
        assert_eq!(t.to_csv().unwrap(), "a,b\n0.5,\"x,y\"\n");
    }

    #[test]
    fn uncertainty_tags() {
        assert_eq!(exact(2.0)["uncertainty"], "exact");
        let e = estimate(Estimate { value: 1.0, std_error: 0.1 });
        assert_eq!(e["std_error"], 0.1);
        assert_eq!(estimate(Estimate::exact(1.0))["uncertainty"], "exact");
        assert_eq!(num(f64::INFINITY), "inf");
    }
}
