//! Artifact writing and run reports.

use std::fs;
use std::path::{Path, PathBuf};

use kagome_core::verify::Invariant;
use serde::Serialize;
use serde_json::Value;

use crate::config::Format;
use crate::CliError;

pub struct Sink {
    dir: PathBuf,
    format: Format,
    files: Vec<String>,
}

impl Sink {
    pub fn new(dir: &Path, format: Format) -> Result<Sink, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Resource(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Sink { dir: dir.to_path_buf(), format, files: Vec::new() })
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    fn write(&mut self, name: &str, content: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, content).map_err(|e| CliError::Resource(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// A numeric table given as CSV text, written in the configured format.
    pub fn table(&mut self, stem: &str, csv: &str) -> Result<(), CliError> {
        match self.format {
            Format::Csv => self.write(&format!("{stem}.csv"), csv),
            Format::Json => {
                let doc = csv_to_json(csv);
                self.write(&format!("{stem}.json"), &pretty(&doc))
            }
        }
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        self.write(name, &pretty(value))
    }

    pub fn text(&mut self, name: &str, content: &str) -> Result<(), CliError> {
        self.write(name, content)
    }
}

pub fn pretty<T: Serialize>(value: &T) -> String {
    kagome_core::io::to_json_string(value)
}

/// `{"columns": [...], "rows": [[...]]}` with every cell parsed as a number.
pub fn csv_to_json(csv: &str) -> Value {
    let mut lines = csv.lines();
    let columns: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let rows: Vec<Vec<Value>> = lines
        .map(|l| {
            l.split(',')
                .map(|c| match c.parse::<f64>() {
                    Ok(x) => serde_json::json!(x),
                    Err(_) => Value::String(c.to_string()),
                })
                .collect()
        })
        .collect();
    serde_json::json!({ "columns": columns, "rows": rows })
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub status: &'static str,
    pub invariants: Vec<Invariant>,
    pub failed: Vec<Failure>,
    pub data: Value,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub invariant: String,
    /// A number, or `"-inf"` for precondition errors.
    pub margin: Value,
}

fn margin_value(m: f64) -> Value {
    if m.is_finite() {
        serde_json::json!(m)
    } else {
        Value::String(if m > 0.0 { "inf" } else { "-inf" }.into())
    }
}

impl Report {
    pub fn new(command: &str, invariants: Vec<Invariant>, data: Value) -> Report {
        let failed: Vec<Failure> = invariants
            .iter()
            .filter(|i| !i.passed)
            .map(|i| Failure { invariant: i.name.clone(), margin: margin_value(i.margin) })
            .collect();
        Report {
            command: command.to_string(),
            status: if failed.is_empty() { "pass" } else { "fail" },
            invariants,
            failed,
            data,
            files: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.failed.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_conversion() {
        let v = csv_to_json("a,b\n1.5e0,2\n");
        assert_eq!(v["columns"][1], "b");
        assert_eq!(v["rows"][0][0], 1.5);
    }

    #[test]
    fn report_lists_failures() {
        let r = Report::new(
            "x",
            vec![Invariant::at_most("ok", 0.0, 1.0), Invariant::at_most("bad", 2.0, 1.0)],
            Value::Null,
        );
        assert_eq!(r.status, "fail");
        assert_eq!(r.failed.len(), 1);
        assert_eq!(r.failed[0].margin, -1.0);
        assert_eq!(margin_value(f64::NEG_INFINITY), "-inf");
    }
}
