//! Result tables and their CSV / JSON-lines renderings.

use std::fmt::Write as _;

use clap::ValueEnum;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Format::from_str(s, true).ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    /// Exact decimal integer too large for any machine type.
    Big(String),
    Real(f64),
    Bool(bool),
    Text(String),
    Missing,
}

impl Cell {
    fn csv(&self, out: &mut String) {
        match self {
            Cell::Int(v) => {
                let _ = write!(out, "{v}");
            }
            Cell::Big(s) | Cell::Text(s) => out.push_str(s),
            Cell::Real(v) => {
                let _ = write!(out, "{v:e}");
            }
            Cell::Bool(b) => {
                let _ = write!(out, "{b}");
            }
            Cell::Missing => {}
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            Cell::Big(s) | Cell::Text(s) => Value::from(s.as_str()),
            Cell::Real(v) if v.is_finite() => Value::from(*v),
            // JSON has no infinities; keep them as text
            Cell::Real(v) => Value::from(format!("{v}")),
            Cell::Bool(b) => Value::from(*b),
            Cell::Missing => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
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

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Real)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Column {
    pub name: &'static str,
    pub doc: &'static str,
}

pub const fn col(name: &'static str, doc: &'static str) -> Column {
    Column { name, doc }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub columns: &'static [Column],
    pub rows: Vec<Vec<Cell>>,
    /// Some estimate in the table should not be trusted.
    pub low_confidence: bool,
}

impl Table {
    pub fn new(columns: &'static [Column]) -> Self {
        Table {
            columns,
            rows: Vec::new(),
            low_confidence: false,
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width does not match the header"
        );
        self.rows.push(row);
    }
}

/// Resolved run settings written ahead of the data.
pub type Header = Vec<(String, String)>;

pub fn render(table: &Table, header: &Header, format: Format) -> String {
    match format {
        Format::Csv => render_csv(table, header),
        Format::Jsonl => render_jsonl(table, header),
    }
}

fn render_csv(table: &Table, header: &Header) -> String {
    let mut out = String::new();
    for (k, v) in header {
        let _ = writeln!(out, "# {k} = {v}");
    }
    for c in table.columns {
        let _ = writeln!(out, "# column {}: {}", c.name, c.doc);
    }
    let names: Vec<&str> = table.columns.iter().map(|c| c.name).collect();
    out.push_str(&names.join(","));
    out.push('\n');
    for row in &table.rows {
        for (i, cell) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            cell.csv(&mut out);
        }
        out.push('\n');
    }
    out
}

fn render_jsonl(table: &Table, header: &Header) -> String {
    let config: Map<String, Value> = header
        .iter()
        .map(|(k, v)| (k.clone(), Value::from(v.as_str())))
        .collect();
    let columns: Map<String, Value> = table
        .columns
        .iter()
        .map(|c| (c.name.to_string(), Value::from(c.doc)))
        .collect();
    let mut first = Map::new();
    first.insert("config".into(), Value::Object(config));
    first.insert("columns".into(), Value::Object(columns));
    let mut out = Value::Object(first).to_string();
    out.push('\n');
    for row in &table.rows {
        let obj: Map<String, Value> = table
            .columns
            .iter()
            .zip(row)
            .map(|(c, v)| (c.name.to_string(), v.json()))
            .collect();
        out.push_str(&Value::Object(obj).to_string());
        out.push('\n');
    }
    out
}
