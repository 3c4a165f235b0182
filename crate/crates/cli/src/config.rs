//! Flag and config-file merging.
//!
//! A config file is a flat JSON object whose keys are flag names without the
//! leading dashes. Flags given on the command line replace file values; any
//! key left unset falls back to the option struct's default.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

fn load_file(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config `{}`: {e}", path.display())))?;
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(CliError::Usage(format!("config `{}` must be a JSON object", path.display()))),
        Err(e) => Err(CliError::Usage(format!("config `{}` is not valid JSON: {e}", path.display()))),
    }
}

/// Overlays the serialized `flags` on the optional config file and
/// deserializes the result into `O`.
///
/// `flags` must serialize unset values as absent keys. Keys that `O` does
/// not serialize back are rejected as unknown.
pub fn merge<F: Serialize, O: Serialize + DeserializeOwned>(file: Option<&Path>, flags: &F) -> Result<O, CliError> {
    let mut merged = match file {
        Some(path) => load_file(path)?,
        None => Map::new(),
    };
    match serde_json::to_value(flags) {
        Ok(Value::Object(overrides)) => merged.extend(overrides),
        Ok(_) => unreachable!("flag structs serialize to objects"),
        Err(e) => return Err(CliError::Usage(e.to_string())),
    }
    let options: O = serde_json::from_value(Value::Object(merged.clone()))
        .map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))?;
    let known = match serde_json::to_value(&options) {
        Ok(Value::Object(map)) => map,
        _ => unreachable!("option structs serialize to objects"),
    };
    if let Some(key) = merged.keys().find(|k| !known.contains_key(*k)) {
        return Err(CliError::Usage(format!("unknown option `{key}`")));
    }
    Ok(options)
}
