//! Config resolution: defaults, then a config file, then command-line flags.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

/// Parses a config file. JSON objects are taken as-is; anything else is read
/// as `key = value` lines, `#` starting a comment. Values are JSON literals
/// where they parse as one, comma lists become arrays, and everything else
/// is a string. Dashes in keys are read as underscores.
pub fn parse_config_text(text: &str) -> Result<Map<String, Value>, CliError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        let v: Value = serde_json::from_str(trimmed).map_err(|e| CliError::Input(format!("config: {e}")))?;
        let Value::Object(map) = v else { unreachable!() };
        return Ok(map.into_iter().map(|(k, v)| (k.replace('-', "_"), v)).collect());
    }
    let mut map = Map::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("config line {}: expected key = value", i + 1)))?;
        map.insert(key.trim().replace('-', "_"), scalar_or_list(value.trim()));
    }
    Ok(map)
}

fn scalar(s: &str) -> Value {
    if let Ok(v) = serde_json::from_str::<Value>(s) {
        return v;
    }
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() => serde_json::json!(x),
        _ => Value::String(s.to_string()),
    }
}

fn scalar_or_list(s: &str) -> Value {
    if s.contains(',') && !s.starts_with('[') {
        Value::Array(
            s.split(',')
                .map(|p| scalar(p.trim()))
                .filter(|v| v != &Value::String(String::new()))
                .collect(),
        )
    } else {
        scalar(s)
    }
}

/// Overlays `file` and then `flags` onto `T::default()`. Keys not known to
/// `T` are an input error.
pub fn resolve<T, F>(file: Option<&Path>, flags: &F) -> Result<T, CliError>
where
    T: Serialize + DeserializeOwned + Default,
    F: Serialize,
{
    let Value::Object(mut merged) = to_value(&T::default())? else {
        unreachable!("configs serialize to objects")
    };
    let mut layers = Vec::new();
    if let Some(path) = file {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))?;
        layers.push(parse_config_text(&text)?);
    }
    if let Value::Object(m) = to_value(flags)? {
        // unset flags serialize as null
        layers.push(m.into_iter().filter(|(_, v)| !v.is_null()).collect());
    }
    for layer in layers {
        for (k, v) in layer {
            if !merged.contains_key(&k) {
                return Err(CliError::Input(format!("unknown config key `{k}`")));
            }
            merged.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Input(format!("config: {e}")))
}

fn to_value(v: &impl Serialize) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Input(e.to_string()))
}
