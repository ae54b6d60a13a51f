//! CSV, JSON summary and gnuplot emission.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use oqs::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// A CSV table with a fixed header, written in one go.
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Table {
        Table { name: name.to_string(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn with_header(name: &str, header: Vec<String>) -> Table {
        Table { name: name.to_string(), header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(format!("{}.csv", self.name));
        let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::io(&path, e))?;
        w.write_record(&self.header).map_err(|e| CliError::io(&path, e))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| CliError::io(&path, e))?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

/// Complex number as `[re, im]`.
pub fn cjson(z: Complex64) -> Value {
    json!([z.re, z.im])
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub command: String,
    pub inputs: Value,
    pub outputs: Value,
    pub residuals: Value,
    pub tolerances: Value,
    pub wall_time: f64,
    pub files: Vec<String>,
}

/// Writes every table, the summary JSON and, if asked, a gnuplot script.
pub fn emit(dir: &Path, tables: &[Table], summary: &mut Summary, plot: Option<&str>) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    for t in tables {
        let p = t.write(dir)?;
        summary.files.push(p.display().to_string());
    }
    if plot == Some("gnuplot") {
        if let Some(first) = tables.first() {
            let path = dir.join(format!("{}.gp", summary.command));
            fs::write(&path, gnuplot_script(first)).map_err(|e| CliError::io(&path, e))?;
            summary.files.push(path.display().to_string());
        }
    }
    let path = dir.join(format!("{}_summary.json", summary.command));
    summary.files.push(path.display().to_string());
    let text = serde_json::to_string_pretty(summary).expect("summary serializes");
    fs::write(&path, &text).map_err(|e| CliError::io(&path, e))?;
    // A closed pipe downstream (e.g. `| head`) is not an error of the run.
    let _ = writeln!(std::io::stdout(), "{text}");
    Ok(())
}

/// Plots the probability columns (`P_*`) against the first column, or every
/// numeric column when there are none.
fn gnuplot_script(t: &Table) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\nset key autotitle columnhead\n");
    s.push_str(&format!("set xlabel '{}'\n", t.header[0]));
    let numeric: Vec<usize> = (1..t.header.len())
        .filter(|&j| t.rows.first().is_some_and(|r| r[j].parse::<f64>().is_ok()))
        .collect();
    let probs: Vec<usize> = numeric.iter().cloned().filter(|&j| t.header[j].starts_with("P_")).collect();
    let numeric = if probs.is_empty() { numeric } else { probs };
    let parts: Vec<String> =
        numeric.iter().map(|j| format!("'{}.csv' using 1:{} with lines", t.name, j + 1)).collect();
    s.push_str(&format!("plot {}\n", parts.join(", \\\n     ")));
    s
}
