use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use heat_series::profile::Sampled1D;
use serde_json::{json, Map, Value};

use crate::CliError;

/// Ordered `key: value` pairs echoed at the top of every output.
#[derive(Debug, Default)]
pub struct Metadata(pub Vec<(String, String)>);

impl Metadata {
    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_string(), value.to_string()));
    }

    fn to_json(&self) -> Value {
        let mut m = Map::new();
        for (k, v) in &self.0 {
            m.insert(k.clone(), Value::String(v.clone()));
        }
        Value::Object(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// A column of a result table.
pub enum Cell {
    Num(f64),
    Int(usize),
    Bool(bool),
    Text(String),
    Missing,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v:.16e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => json!(v),
            Cell::Int(v) => json!(v),
            Cell::Bool(v) => json!(v),
            Cell::Text(s) => json!(s),
            Cell::Missing => Value::Null,
        }
    }
}

pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

/// Everything written by one command.
pub struct Output {
    pub metadata: Metadata,
    pub table: Table,
    /// Trailing summary (`# key: value` lines in CSV, an object in JSON).
    pub summary: Metadata,
}

impl Output {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut s = String::new();
                for (k, v) in &self.metadata.0 {
                    let _ = writeln!(s, "# {k}: {v}");
                }
                let _ = writeln!(s, "{}", self.table.columns.join(","));
                for row in &self.table.rows {
                    let cells: Vec<String> = row.iter().map(Cell::csv).collect();
                    let _ = writeln!(s, "{}", cells.join(","));
                }
                for (k, v) in &self.summary.0 {
                    let _ = writeln!(s, "# summary {k}: {v}");
                }
                s
            }
            Format::Json => {
                let rows: Vec<Value> = self
                    .table
                    .rows
                    .iter()
                    .map(|row| {
                        let mut m = Map::new();
                        for (c, cell) in self.table.columns.iter().zip(row) {
                            m.insert(c.to_string(), cell.json());
                        }
                        Value::Object(m)
                    })
                    .collect();
                let mut doc = json!({ "metadata": self.metadata.to_json(), "rows": rows });
                if !self.summary.0.is_empty() {
                    doc["summary"] = self.summary.to_json();
                }
                let mut s = serde_json::to_string_pretty(&doc).expect("JSON values always serialize");
                s.push('\n');
                s
            }
        }
    }
}

/// Writes `contents` to `path` via a temporary file in the same directory, or to stdout.
pub fn write_atomic(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    let Some(path) = path else {
        std::io::stdout().write_all(contents.as_bytes()).map_err(|e| CliError::Io(format!("stdout: {e}")))?;
        return Ok(());
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io_err = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(contents.as_bytes()).map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// Reads `x,value` pairs; `#` lines, blank lines and a non-numeric header are skipped.
pub fn read_samples(path: &Path) -> Result<Sampled1D, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut xs = Vec::new();
    let mut vs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || CliError::Config(format!("{} line {}: expected `x,value`, got `{line}`", path.display(), i + 1));
        let mut parts = line.split(',').map(str::trim);
        let (Some(a), Some(b)) = (parts.next(), parts.next()) else { return Err(bad()) };
        match (a.parse::<f64>(), b.parse::<f64>()) {
            (Ok(x), Ok(v)) if x.is_finite() && v.is_finite() => {
                xs.push(x);
                vs.push(v);
            }
            // a header row before any data
            (Err(_), Err(_)) if xs.is_empty() => continue,
            _ => return Err(bad()),
        }
    }
    if xs.len() < 2 {
        return Err(CliError::Config(format!("{}: need at least two samples", path.display())));
    }
    let (a, b) = (xs[0], xs[xs.len() - 1]);
    let h = (b - a) / (xs.len() - 1) as f64;
    for (i, x) in xs.iter().enumerate() {
        if (x - (a + i as f64 * h)).abs() > 1e-9 * h.abs().max(1.0) {
            return Err(CliError::Config(format!("{}: samples must lie on a uniform increasing grid (row {})", path.display(), i + 1)));
        }
    }
    Sampled1D::new(a, b, vs).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
