//! Tabular result export to CSV, JSON and NDJSON.
//!
//! CSV floats use 17 significant digits; JSON uses the shortest
//! representation that round-trips, so both re-import to identical bits.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Str(String),
    Bool(bool),
    Null,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u8> for Cell {
    fn from(v: u8) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Str(v.to_string())
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Null, Into::into)
    }
}

impl Cell {
    fn csv_field(&self) -> String {
        match self {
            Cell::Float(v) => format_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Str(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Null => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Float(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Int(v) => Value::from(*v),
            Cell::Str(s) => Value::from(s.as_str()),
            Cell::Bool(b) => Value::from(*b),
            Cell::Null => Value::Null,
        }
    }
}

/// 17 significant digits, enough to recover every `f64` exactly.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// A named table with fixed columns; rows are written in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&'static str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Multiplies the named float columns by `factor`.
    pub fn scale_columns(&mut self, columns: &[&str], factor: f64) {
        if factor == 1.0 {
            return;
        }
        let idx: Vec<usize> = columns
            .iter()
            .filter_map(|c| self.columns.iter().position(|n| n == c))
            .collect();
        for row in &mut self.rows {
            for &i in &idx {
                if let Cell::Float(v) = &mut row[i] {
                    *v *= factor;
                }
            }
        }
    }

    fn json_rows(&self) -> impl Iterator<Item = Value> + '_ {
        self.rows.iter().map(|row| {
            let map: Map<String, Value> = self
                .columns
                .iter()
                .zip(row)
                .map(|(c, v)| (c.to_string(), v.json()))
                .collect();
            Value::Object(map)
        })
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv_field))?;
        }
        w.flush()
    }

    pub fn write_json(&self, path: &Path) -> std::io::Result<()> {
        let value = serde_json::json!({
            "table": self.name,
            "columns": self.columns,
            "rows": self.json_rows().collect::<Vec<_>>(),
        });
        write_json_value(path, &value)
    }

    pub fn write_ndjson(&self, path: &Path) -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for row in self.json_rows() {
            serde_json::to_writer(&mut w, &row)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    /// Writes the table in every requested format; returns the file names.
    pub fn write_all(&self, dir: &Path, formats: &[Format]) -> std::io::Result<Vec<String>> {
        let mut written = Vec::new();
        for format in formats {
            let (ext, f): (&str, fn(&Table, &Path) -> std::io::Result<()>) = match format {
                Format::Csv => ("csv", Table::write_csv),
                Format::Json => ("json", Table::write_json),
                Format::Ndjson => ("ndjson", Table::write_ndjson),
            };
            let name = format!("{}.{ext}", self.name);
            f(self, &dir.join(&name))?;
            written.push(name);
        }
        Ok(written)
    }
}

pub fn write_json_value<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()
}

/// Output directory sink that records every file it writes.
#[derive(Debug)]
pub struct OutputDir {
    pub root: PathBuf,
    pub files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn table(&mut self, table: &Table, formats: &[Format]) -> std::io::Result<()> {
        let names = table.write_all(&self.root, formats)?;
        self.files.extend(names);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> std::io::Result<()> {
        write_json_value(&self.root.join(name), value)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn text(&mut self, name: &str, contents: &str) -> std::io::Result<()> {
        fs::write(self.root.join(name), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_through_csv_text() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 0.0] {
            let s = format_float(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn scaling_touches_only_named_float_columns() {
        let mut t = Table::new("t", &["state_index", "re_E"]);
        t.push(vec![3usize.into(), 2.0.into()]);
        t.scale_columns(&["re_E", "state_index"], 0.5);
        assert_eq!(t.rows[0], vec![Cell::Int(3), Cell::Float(1.0)]);
    }
}
