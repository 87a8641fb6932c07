//! Tabular experiment output: CSV with `#` header comments and a JSON
//! mirror.
//!
//! The CSV carries everything needed to rerun the experiment (command,
//! version, seed, resolved config) and nothing that varies between runs,
//! so equal inputs give byte-identical files. Wall-clock time is written
//! to the JSON mirror only.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::stats::Estimate;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            // shortest representation that round-trips
            Cell::Float(v) => format!("{v:?}"),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Sites or points joined with `;` so they fit one CSV field.
pub fn joined<T: ToString>(xs: &[T]) -> Cell {
    Cell::Text(xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: String,
    pub seed: Option<u64>,
    /// Resolved configuration, echoed verbatim.
    pub config: Value,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Report {
    pub fn new(command: &str, seed: Option<u64>, config: Value, columns: &[&str]) -> Self {
        Self {
            command: command.to_string(),
            seed,
            config,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::InvalidParameter(format!(
                "row has {} cells, table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Convenience for the common `mean, stderr, replicas` triple.
    pub fn estimate_cells(e: &Estimate) -> [Cell; 3] {
        [e.mean().into(), e.std_error().into(), e.count().into()]
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::new();
        out.push_str(&format!("# command: {}\n# version: {VERSION}\n", self.command));
        if let Some(seed) = self.seed {
            out.push_str(&format!("# seed: {seed}\n"));
        }
        out.push_str(&format!("# config: {}\n", self.config));
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(io)?;
        }
        let body = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        out.push_str(&String::from_utf8(body).expect("csv output is UTF-8"));
        Ok(out)
    }

    pub fn to_json(&self, wall_clock_seconds: Option<f64>) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let obj = self.columns.iter().cloned().zip(r.iter().map(|c| json!(c))).collect();
                Value::Object(obj)
            })
            .collect();
        json!({
            "command": self.command,
            "version": VERSION,
            "seed": self.seed,
            "config": self.config,
            "wall_clock_seconds": wall_clock_seconds,
            "columns": self.columns,
            "rows": rows,
        })
    }

    /// Write `path` (CSV) and the JSON mirror next to it; returns the JSON
    /// path.
    pub fn write(&self, path: &Path, wall_clock_seconds: Option<f64>) -> Result<PathBuf> {
        let csv = self.to_csv()?;
        let json_path = path.with_extension("json");
        let json = serde_json::to_string_pretty(&self.to_json(wall_clock_seconds)).expect("report serializes");
        fs::write(path, csv).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        fs::write(&json_path, json + "\n").map_err(|e| Error::Io(format!("{}: {e}", json_path.display())))?;
        Ok(json_path)
    }
}

fn io(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}
