use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::require;
use crate::config::Config;
use crate::report::{Outcome, Table};
use crate::CliError;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportConfig {
    /// JSON reports written by earlier runs.
    pub inputs: Vec<String>,
}

impl Config for ReportConfig {
    fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        require(&mut p, !self.inputs.is_empty(), "inputs must not be empty");
        p
    }
}

#[derive(Args, Debug, Serialize)]
pub struct ReportArgs {
    /// Report files to merge.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    inputs: Vec<String>,
}

/// Concatenates the tables of all inputs into one, over the union of their
/// columns (first-seen order), each row tagged with its source.
pub fn run(cfg: &ReportConfig) -> Result<Outcome, CliError> {
    let mut sources = Vec::new();
    let mut columns: Vec<String> = vec!["source".into(), "command".into()];
    let mut rows: Vec<(String, String, serde_json::Map<String, Value>)> = Vec::new();
    for path in &cfg.inputs {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::invalid(format!("{path}: {e}")))?;
        let doc: Value = serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("{path}: {e}")))?;
        let command = doc
            .get("command")
            .and_then(Value::as_str)
            .ok_or_else(|| CliError::invalid(format!("{path}: not a report (no command)")))?
            .to_string();
        sources.push(json!({
            "path": path,
            "command": command,
            "version": doc.get("version").cloned().unwrap_or(Value::Null),
        }));
        let Some(table) = doc.get("table") else { continue };
        let cols: Vec<String> = serde_json::from_value(table["columns"].clone())
            .map_err(|e| CliError::invalid(format!("{path}: table columns: {e}")))?;
        let body: Vec<Vec<Value>> = serde_json::from_value(table["rows"].clone())
            .map_err(|e| CliError::invalid(format!("{path}: table rows: {e}")))?;
        for c in &cols {
            if !columns.contains(c) {
                columns.push(c.clone());
            }
        }
        for r in body {
            if r.len() != cols.len() {
                return Err(CliError::invalid(format!("{path}: ragged table row")));
            }
            rows.push((path.clone(), command.clone(), cols.iter().cloned().zip(r).collect()));
        }
    }
    let mut table = Table::new(columns.clone());
    for (src, cmd, mut cells) in rows {
        let row = columns
            .iter()
            .map(|c| match c.as_str() {
                "source" => json!(src),
                "command" => json!(cmd),
                _ => cells.remove(c).unwrap_or(Value::Null),
            })
            .collect();
        table.push(row);
    }
    Ok(Outcome::new(json!({"sources": sources, "rows": table.rows.len()})).with_table(table))
}
