//! Layered configuration: built-in defaults, then the subcommand's table in
//! the config file, then `--set key=value` overrides, then explicit flags.

use std::path::Path;

use serde::{de::DeserializeOwned, Serialize};
use toml::{Table, Value};

use crate::CliError;

/// A subcommand's resolved settings.
pub trait Config: Serialize + DeserializeOwned + Default {
    /// Keys that are legal but absent from the defaults (unset optionals).
    const OPTIONAL: &'static [&'static str] = &[];

    /// Every problem with the resolved settings, not just the first.
    fn problems(&self) -> Vec<String>;
}

pub fn load_file(path: &Path) -> Result<Table, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::invalid(format!("config {}: {e}", path.display())))?;
    text.parse::<Table>()
        .map_err(|e| CliError::invalid(format!("config {}: {e}", path.display())))
}

/// `key.path=value`; the value is read as TOML when it parses, else as a string.
pub fn parse_override(text: &str) -> Result<(Vec<String>, Value), String> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| format!("override `{text}` is not key=value"))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(format!("override `{text}` has an empty key segment"));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((path, value))
}

fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn insert_path(table: &mut Table, path: &[String], value: Value) {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut cur = table;
    for p in parents {
        let entry = cur.entry(p.clone()).or_insert_with(|| Value::Table(Table::new()));
        if !entry.is_table() {
            *entry = Value::Table(Table::new());
        }
        cur = entry.as_table_mut().expect("just made a table");
    }
    cur.insert(last.clone(), value);
}

/// Keys of `given` with no counterpart in `known`, as dotted paths. Array
/// elements and free-form maps (empty by default) are left to deserialization.
fn unknown_keys(known: &Table, given: &Table, prefix: &str, optional: &[&str], out: &mut Vec<String>) {
    for (k, v) in given {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match (known.get(k), v) {
            (Some(Value::Table(kt)), _) if kt.is_empty() => {}
            (Some(Value::Table(kt)), Value::Table(gt)) => unknown_keys(kt, gt, &path, optional, out),
            (Some(_), _) => {}
            (None, _) if optional.contains(&path.as_str()) => {}
            (None, _) => out.push(path),
        }
    }
}

fn to_table<T: Serialize>(v: &T) -> Table {
    match Value::try_from(v).expect("settings serialize to TOML") {
        Value::Table(t) => t,
        _ => unreachable!("settings are structs"),
    }
}

/// Resolves a subcommand's settings; all problems are reported together.
pub fn resolve<C: Config, F: Serialize>(
    section: &str,
    file: Option<&Table>,
    overrides: &[(Vec<String>, Value)],
    flags: &F,
) -> Result<C, CliError> {
    let defaults = to_table(&C::default());
    let mut given = Table::new();
    let mut problems = Vec::new();
    if let Some(file) = file {
        match file.get(section) {
            Some(Value::Table(t)) => merge(&mut given, t.clone()),
            Some(_) => problems.push(format!("config section `{section}` must be a table")),
            None => {}
        }
    }
    for (path, value) in overrides {
        insert_path(&mut given, path, value.clone());
    }
    merge(&mut given, to_table(flags));
    let mut unknown = Vec::new();
    unknown_keys(&defaults, &given, "", C::OPTIONAL, &mut unknown);
    problems.extend(unknown.into_iter().map(|k| format!("unknown key `{section}.{k}`")));
    let mut resolved = defaults;
    merge(&mut resolved, given);
    match Value::Table(resolved).try_into::<C>() {
        Ok(cfg) => {
            problems.extend(cfg.problems());
            if problems.is_empty() {
                Ok(cfg)
            } else {
                Err(CliError::Invalid(problems))
            }
        }
        Err(e) => {
            problems.push(format!("{section}: {}", e.to_string().trim()));
            Err(CliError::Invalid(problems))
        }
    }
}

/// The defaults as config-file text, for `--help`.
pub fn key_listing<C: Config>(section: &str) -> String {
    let body = toml::to_string(&C::default()).expect("defaults serialize");
    let mut out = format!("Config keys ([{section}] table of --config, or --set key=value) and defaults:\n\n");
    let mut table = String::new();
    for line in body.lines() {
        if let Some(name) = line.strip_prefix("[[").and_then(|l| l.strip_suffix("]]")) {
            table = format!("{name}[]");
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            table = name.to_string();
            continue;
        }
        if let Some((k, v)) = line.split_once(" = ") {
            let key = if table.is_empty() { k.to_string() } else { format!("{table}.{k}") };
            out.push_str(&format!("  {key} = {v}\n"));
        }
    }
    for k in C::OPTIONAL {
        out.push_str(&format!("  {k} = (unset)\n"));
    }
    out
}
