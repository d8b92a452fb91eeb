//! JSON and CSV rendering of command results.

use clap::ValueEnum;
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Flattens a document into `(key path, scalar)` rows; nested keys are joined with `.`,
/// array elements use their index.
pub fn flatten(value: &Value) -> Vec<(String, Value)> {
    let mut rows = Vec::new();
    walk("", value, &mut rows);
    rows
}

fn walk(prefix: &str, value: &Value, rows: &mut Vec<(String, Value)>) {
    let child = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match value {
        Value::Object(map) if !map.is_empty() => {
            for (k, v) in map {
                walk(&child(k), v, rows);
            }
        }
        Value::Array(items) if !items.is_empty() => {
            for (i, v) in items.iter().enumerate() {
                walk(&child(&i.to_string()), v, rows);
            }
        }
        scalar => rows.push((prefix.to_string(), scalar.clone())),
    }
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        Value::Array(_) => "[]".into(),
        Value::Object(_) => "{}".into(),
        other => other.to_string(),
    }
}

/// Renders the document; numbers are printed in shortest round-trip form either way.
pub fn render(value: &Value, format: Format) -> Result<String> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(value)
                .map_err(|e| Error::Numerical(format!("cannot serialize output: {e}")))?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| Error::Numerical(format!("cannot write CSV: {e}"));
            w.write_record(["key", "value"]).map_err(io)?;
            for (k, v) in flatten(value) {
                w.write_record([k, scalar_text(&v)]).map_err(io)?;
            }
            let bytes = w
                .into_inner()
                .map_err(|e| Error::Numerical(format!("cannot write CSV: {e}")))?;
            String::from_utf8(bytes).map_err(|e| Error::Numerical(format!("CSV is not UTF-8: {e}")))
        }
    }
}
