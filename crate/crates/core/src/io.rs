//! Delimited-file plumbing shared by the cohort loader and the stage artifacts.

use std::collections::HashMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use serde_json::{Map, Number, Value};

use crate::error::{Error, Result};

pub(crate) const DATE_FORMAT: &str = "%Y-%m-%d";

/// A CSV file read fully into memory with its columns resolved by name.
pub(crate) struct CsvFile {
    pub name: String,
    columns: HashMap<String, usize>,
    rows: Vec<(u64, csv::StringRecord)>,
}

pub(crate) struct Row<'a> {
    file: &'a str,
    line: u64,
    columns: &'a HashMap<String, usize>,
    record: &'a csv::StringRecord,
}

impl CsvFile {
    /// Opens `path` and checks that every column in `required` is present.
    pub fn open(path: &Path, required: &[&str], missing: fn(PathBuf) -> Error) -> Result<Self> {
        if !path.is_file() {
            return Err(missing(path.to_path_buf()));
        }
        let name = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let header = reader.headers()?.clone();
        let columns: HashMap<String, usize> = header
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim_start_matches('\u{feff}').to_string(), i))
            .collect();
        for col in required {
            if !columns.contains_key(*col) {
                return Err(Error::Malformed {
                    file: name,
                    line: 1,
                    message: format!("missing column `{col}` in header"),
                });
            }
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::Malformed {
                file: name.clone(),
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            rows.push((line, record));
        }
        Ok(CsvFile {
            name,
            columns,
            rows,
        })
    }

    pub fn input(path: &Path, required: &[&str]) -> Result<Self> {
        Self::open(path, required, Error::MissingFile)
    }

    pub fn artifact(path: &Path, required: &[&str]) -> Result<Self> {
        Self::open(path, required, Error::MissingArtifact)
    }

    pub fn rows(&self) -> impl Iterator<Item = Row<'_>> {
        self.rows.iter().map(move |(line, record)| Row {
            file: &self.name,
            line: *line,
            columns: &self.columns,
            record,
        })
    }

    pub fn header_len(&self) -> usize {
        self.columns.len()
    }

    pub fn has_column(&self, col: &str) -> bool {
        self.columns.contains_key(col)
    }
}

impl<'a> Row<'a> {
    pub fn line(&self) -> u64 {
        self.line
    }

    pub fn file(&self) -> &'a str {
        self.file
    }

    pub fn get(&self, col: &str) -> &'a str {
        self.columns
            .get(col)
            .and_then(|&i| self.record.get(i))
            .unwrap_or("")
    }

    pub fn len(&self) -> usize {
        self.record.len()
    }

    pub fn malformed(&self, message: impl Into<String>) -> Error {
        Error::Malformed {
            file: self.file.to_string(),
            line: self.line,
            message: message.into(),
        }
    }

    pub fn parse<T>(&self, col: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        let raw = self.get(col);
        raw.parse()
            .map_err(|e| self.malformed(format!("column `{col}`: cannot parse `{raw}`: {e}")))
    }

    pub fn parse_opt<T>(&self, col: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        if self.get(col).is_empty() {
            Ok(None)
        } else {
            self.parse(col).map(Some)
        }
    }

    pub fn date(&self, col: &str) -> Result<NaiveDate> {
        let raw = self.get(col);
        NaiveDate::parse_from_str(raw, DATE_FORMAT)
            .map_err(|e| self.malformed(format!("column `{col}`: invalid date `{raw}`: {e}")))
    }

    pub fn date_opt(&self, col: &str) -> Result<Option<NaiveDate>> {
        if self.get(col).is_empty() {
            Ok(None)
        } else {
            self.date(col).map(Some)
        }
    }
}

/// A single output cell. Floats keep their rendered text so CSV and JSON agree.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Empty,
    Text(String),
    Int(i64),
    Float(String),
    Bool(bool),
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    /// Shortest round-trip decimal rendering.
    pub fn float(x: f64) -> Self {
        Cell::Float(format_float(x))
    }

    /// Fixed-decimal rendering for reported percentages and rates.
    pub fn fixed(x: f64, decimals: usize) -> Self {
        if x.is_finite() {
            Cell::Float(format!("{x:.decimals$}"))
        } else {
            Cell::float(x)
        }
    }

    /// Scientific rendering for probabilities that may be vanishingly small.
    pub fn prob(x: f64) -> Self {
        Cell::Float(format!("{x:e}"))
    }

    pub fn opt_float(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::float)
    }

    pub fn opt_fixed(x: Option<f64>, decimals: usize) -> Self {
        x.map_or(Cell::Empty, |v| Cell::fixed(v, decimals))
    }

    fn as_csv(&self) -> String {
        match self {
            Cell::Empty => String::new(),
            Cell::Text(s) | Cell::Float(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn as_json(&self) -> Value {
        match self {
            Cell::Empty => Value::Null,
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Int(i) => Value::Number((*i).into()),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Float(s) => s
                .parse::<f64>()
                .ok()
                .and_then(Number::from_f64)
                .map_or_else(|| Value::String(s.clone()), Value::Number),
        }
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as i64)
    }
}

impl From<u32> for Cell {
    fn from(n: u32) -> Self {
        Cell::Int(n as i64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

pub(crate) fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x}")
    }
}

/// A rectangular table destined for a CSV artifact (and optionally its JSON mirror).
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(&self.header)?;
        for row in &self.rows {
            writer.write_record(row.iter().map(Cell::as_csv))?;
        }
        writer
            .into_inner()
            .map_err(|e| Error::invalid(format!("csv buffer: {e}")))
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let records: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .header
                    .iter()
                    .cloned()
                    .zip(row.iter().map(Cell::as_json))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        let mut bytes = serde_json::to_vec_pretty(&records)?;
        bytes.push(b'\n');
        Ok(bytes)
    }
}

/// Writes `bytes` to `path` via a `.partial` sibling that is renamed into place.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let partial = partial_path(path);
    fs::write(&partial, bytes).map_err(|e| Error::io(&partial, e))?;
    fs::rename(&partial, path).map_err(|e| Error::io(path, e))
}

pub(crate) fn partial_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".partial");
    path.with_file_name(name)
}
