//! Deterministic CSV and JSON rendering. Floats are always written with 17
//! significant digits.

use std::io::Write;
use std::path::Path;

use serde::ser::{Serialize, SerializeMap, Serializer};
use serde_json::value::RawValue;

use super::config::{Format, ScenarioConfig};

pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl Value {
    fn csv_text(&self) -> String {
        match self {
            Value::Int(i) => i.to_string(),
            Value::Float(x) => fmt_float(*x),
            Value::Bool(b) => b.to_string(),
            Value::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Float(x)
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

impl From<i32> for Value {
    fn from(i: i32) -> Self {
        Value::Int(i as i64)
    }
}

impl From<usize> for Value {
    fn from(i: usize) -> Self {
        Value::Int(i as i64)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Int(i) => s.serialize_i64(*i),
            Value::Bool(b) => s.serialize_bool(*b),
            Value::Text(t) => s.serialize_str(t),
            Value::Float(x) if x.is_finite() => {
                let raw = RawValue::from_string(fmt_float(*x)).map_err(serde::ser::Error::custom)?;
                raw.serialize(s)
            }
            Value::Float(_) => s.serialize_none(),
        }
    }
}

/// Ordered key/value pairs, serialized as a JSON object in insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metadata(pub Vec<(String, Value)>);

impl Metadata {
    pub fn push(&mut self, key: &str, value: impl Into<Value>) {
        self.0.push((key.to_string(), value.into()));
    }
}

impl Serialize for Metadata {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

/// One command's output: metadata, the resolved configuration and a table.
#[derive(Clone, Debug)]
pub struct Document {
    pub command: &'static str,
    pub config: ScenarioConfig,
    pub metadata: Metadata,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

#[derive(serde::Serialize)]
struct JsonDocument<'a> {
    command: &'a str,
    config: &'a ScenarioConfig,
    metadata: &'a Metadata,
    columns: &'a [&'static str],
    rows: &'a [Vec<Value>],
}

impl Document {
    pub fn new(command: &'static str, config: &ScenarioConfig, columns: Vec<&'static str>) -> Self {
        Self { command, config: config.clone(), metadata: Metadata::default(), columns, rows: Vec::new() }
    }

    pub fn render(&self, format: Format) -> anyhow::Result<String> {
        match format {
            Format::Json => self.render_json(),
            Format::Csv => self.render_csv(),
        }
    }

    fn render_json(&self) -> anyhow::Result<String> {
        let doc = JsonDocument {
            command: self.command,
            config: &self.config,
            metadata: &self.metadata,
            columns: &self.columns,
            rows: &self.rows,
        };
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        Ok(text)
    }

    fn render_csv(&self) -> anyhow::Result<String> {
        let mut out = Vec::new();
        writeln!(out, "# command: {}", self.command)?;
        writeln!(out, "# config: {}", serde_json::to_string(&self.config)?)?;
        for (k, v) in &self.metadata.0 {
            writeln!(out, "# {k}: {}", v.csv_text())?;
        }
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&self.columns)?;
            for row in &self.rows {
                w.write_record(row.iter().map(Value::csv_text))?;
            }
            w.flush()?;
        }
        Ok(String::from_utf8(out)?)
    }
}

/// Writes `text` to `path` through a temporary file in the same directory,
/// so readers never see a partial file.
pub fn write_atomic(path: &Path, text: &str) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)?;
    Ok(())
}
