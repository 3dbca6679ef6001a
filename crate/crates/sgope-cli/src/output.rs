use std::path::Path;

use serde_json::{json, Value};

use crate::CliError;

/// A subcommand result: a table or a JSON document.
pub enum Output {
    Table { header: Vec<&'static str>, rows: Vec<Vec<String>> },
    Json(Value),
}

impl Output {
    pub fn default_format(&self) -> &'static str {
        match self {
            Output::Table { .. } => "csv",
            Output::Json(_) => "json",
        }
    }

    pub fn render(&self, format: &str) -> Result<String, CliError> {
        match (self, format) {
            (Output::Table { header, rows }, "csv") => {
                let mut s = header.join(",");
                s.push('\n');
                for r in rows {
                    s.push_str(&r.join(","));
                    s.push('\n');
                }
                Ok(s)
            }
            (Output::Table { header, rows }, "json") => {
                let objs: Vec<Value> = rows
                    .iter()
                    .map(|r| Value::Object(header.iter().zip(r).map(|(h, v)| (h.to_string(), cell(v))).collect()))
                    .collect();
                Ok(pretty(&Value::Array(objs)))
            }
            (Output::Json(v), "json") => Ok(pretty(v)),
            (Output::Json(_), "csv") => Err(CliError::Precondition("this subcommand only writes json".into())),
            (_, other) => Err(CliError::Precondition(format!("format must be csv or json, got '{other}'"))),
        }
    }
}

fn cell(v: &str) -> Value {
    if let Ok(i) = v.parse::<i64>() {
        return json!(i);
    }
    if let Ok(f) = v.parse::<f64>() {
        if f.is_finite() {
            return json!(f);
        }
    }
    match v {
        "true" => json!(true),
        "false" => json!(false),
        _ => json!(v),
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialise");
    s.push('\n');
    s
}

pub fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}
