//! JSON and CSV emission with a header record.

use crate::{Failure, Format};
use serde_json::{json, Value};
use std::io::Write;
use std::path::PathBuf;

/// 17 significant digits; non-finite values spelled out.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, r: Vec<String>) {
        debug_assert_eq!(r.len(), self.columns.len());
        self.rows.push(r);
    }

    /// Rows as objects, numbers parsed back where possible.
    pub fn to_json_records(&self) -> Value {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let obj = self
                    .columns
                    .iter()
                    .zip(r)
                    .map(|(c, v)| {
                        let val = v.parse::<f64>().ok().filter(|x| x.is_finite()).map(|x| json!(x)).unwrap_or(json!(v));
                        (c.clone(), val)
                    })
                    .collect::<serde_json::Map<_, _>>();
                Value::Object(obj)
            })
            .collect();
        Value::Array(rows)
    }

    fn write_csv(&self, out: &mut String) {
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
    }
}

/// Writes `{"header": .., "data": ..}` as JSON, or the header as a `#`
/// comment line followed by the table as CSV.
pub fn emit(path: &Option<PathBuf>, format: Format, header: &Value, data: &Value, table: Option<&Table>) -> Result<(), Failure> {
    let mut text = String::new();
    match format {
        Format::Json => {
            let doc = json!({ "header": header, "data": data });
            text.push_str(&serde_json::to_string_pretty(&doc).expect("json serializes"));
            text.push('\n');
        }
        Format::Csv => {
            let t = table.ok_or_else(|| Failure::Usage("this subcommand has no CSV form".into()))?;
            text.push_str("# ");
            text.push_str(&serde_json::to_string(header).expect("json serializes"));
            text.push('\n');
            t.write_csv(&mut text);
        }
    }
    let res = match path {
        Some(p) => std::fs::write(p, text.as_bytes()),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    };
    res.map_err(|e| Failure::Diagnostic(format!("writing output: {e}")))
}
