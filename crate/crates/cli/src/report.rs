use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

pub const TOOL: &str = "sim2real";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Rows for `--csv`; cells are JSON scalars.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// What a subcommand hands back for emission.
pub struct Outcome {
    pub result: Value,
    pub table: Option<Table>,
}

impl Outcome {
    pub fn new(result: impl Serialize) -> Self {
        Self {
            result: serde_json::to_value(result).expect("results serialize"),
            table: None,
        }
    }

    pub fn with_table(mut self, table: Table) -> Self {
        self.table = Some(table);
        self
    }
}

/// Rounds every float to 6 significant digits; non-finite values become null.
pub fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            let r: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
            serde_json::Number::from_f64(r).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_floats).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_floats(v))).collect()),
        other => other,
    }
}

/// The single JSON object printed for a run. Keys come out sorted because
/// the map type is ordered.
pub fn render_json(command: &str, config: &impl Serialize, out: &Outcome) -> String {
    let mut doc = Map::new();
    doc.insert("tool".into(), TOOL.into());
    doc.insert("version".into(), VERSION.into());
    doc.insert("command".into(), command.into());
    doc.insert(
        "config".into(),
        serde_json::to_value(config).expect("config serializes"),
    );
    doc.insert("result".into(), out.result.clone());
    if let Some(t) = &out.table {
        doc.insert("table".into(), serde_json::to_value(t).expect("table serializes"));
    }
    let doc = round_floats(Value::Object(doc));
    serde_json::to_string_pretty(&doc).expect("report serializes") + "\n"
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// CSV of the outcome's table, or a one-row table of the result's scalar
/// fields when the subcommand has no natural table.
pub fn render_csv(out: &Outcome) -> Result<String, CliError> {
    let table = match &out.table {
        Some(t) => t.clone(),
        None => {
            let Value::Object(o) = &out.result else {
                return Err(CliError::invalid("result has no tabular form"));
            };
            let scalars: Vec<(&String, &Value)> =
                o.iter().filter(|(_, v)| !v.is_object() && !v.is_array()).collect();
            let mut t = Table::new(scalars.iter().map(|(k, _)| k.as_str()));
            t.push(scalars.iter().map(|(_, v)| (*v).clone()).collect());
            t
        }
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    let compute = |e: csv::Error| CliError::Compute(e.to_string());
    w.write_record(&table.columns).map_err(compute)?;
    for row in &table.rows {
        let row = round_floats(Value::Array(row.clone()));
        let cells: Vec<String> = row.as_array().expect("array").iter().map(cell).collect();
        w.write_record(&cells).map_err(compute)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Compute(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 cells"))
}
