//! Parameter layering: preset, then `--config` file, then command-line flags.
//! The merged object is validated against the command's JSON schema before
//! it is deserialized.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::CliError;

fn schema_text(command: &str) -> Option<&'static str> {
    Some(match command {
        "transmission" => include_str!("../../../schemas/transmission.schema.json"),
        "poles" => include_str!("../../../schemas/poles.schema.json"),
        "sweep" => include_str!("../../../schemas/sweep.schema.json"),
        "ep" => include_str!("../../../schemas/ep.schema.json"),
        "qep" => include_str!("../../../schemas/qep.schema.json"),
        "survival" => include_str!("../../../schemas/survival.schema.json"),
        "zeno" => include_str!("../../../schemas/zeno.schema.json"),
        "continuum-limit" => include_str!("../../../schemas/continuum-limit.schema.json"),
        _ => return None,
    })
}

/// Parameter sets of the published figures and tables.
pub fn preset(command: &str, name: &str) -> Result<Value, CliError> {
    let v = match (command, name) {
        ("transmission" | "poles", "fig3" | "fig4") => json!({"alpha0": 0.0, "alpha1": 1.0}),
        ("transmission" | "poles", "fig5" | "fig6") => json!({"alpha0": 3.0, "alpha1": 1.0}),
        ("continuum-limit", "fig4") => json!({"alpha0": 0.0, "alpha1": 1.0}),
        ("continuum-limit", "fig6") => json!({"alpha0": 3.0, "alpha1": 1.0}),
        ("sweep", "fig11") => json!({"w1": 0.5, "v0_min": -3.0, "v0_max": 3.0, "steps": 601}),
        ("ep", "figB1") => json!({"alpha1": 1.0, "alpha0_min": 0.0, "alpha0_max": 1.0, "steps": 50}),
        ("qep" | "survival", "table1") => json!({"v0": 0.0, "w1": 0.5}),
        ("survival", "fig16") => json!({"v0": 0.0, "w1": 0.5, "psi0": [1.0, 1.0], "tmin": -20.0, "tmax": 20.0, "points": 81}),
        ("survival", "fig20") => json!({"v0": 0.0, "w1": 0.5, "psi0": [1.0, 1.0], "tmin": -200.0, "tmax": 200.0, "points": 801}),
        _ => return Err(CliError::validation(format!("no preset '{name}' for command '{command}'"))),
    };
    Ok(v)
}

fn merge(base: &mut Map<String, Value>, top: Map<String, Value>) {
    for (k, v) in top {
        base.insert(k, v);
    }
}

fn read_config(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(CliError::validation(format!("{}: config must be a JSON object", path.display()))),
        Err(e) => Err(CliError::validation(format!("{}: {e}", path.display()))),
    }
}

/// Merged and validated parameters, plus the JSON they came from.
pub fn resolve<T: Serialize + DeserializeOwned>(
    command: &str,
    flags: &T,
    preset_name: Option<&str>,
    config: Option<&Path>,
) -> Result<(T, Value), CliError> {
    let mut file = match config {
        Some(p) => read_config(p)?,
        None => Map::new(),
    };
    let file_preset = match file.remove("preset") {
        Some(Value::String(s)) => Some(s),
        Some(_) => return Err(CliError::validation("config key 'preset' must be a string")),
        None => None,
    };
    let mut merged = Map::new();
    if let Some(name) = preset_name.map(str::to_string).or(file_preset) {
        if let Value::Object(m) = preset(command, &name)? {
            merge(&mut merged, m);
        }
    }
    merge(&mut merged, file);
    if let Value::Object(m) = serde_json::to_value(flags).expect("flags serialize") {
        merge(&mut merged, m);
    }
    let merged = Value::Object(merged);
    validate(command, &merged)?;
    let params = serde_json::from_value(merged.clone()).map_err(|e| CliError::validation(e.to_string()))?;
    Ok((params, merged))
}

pub fn validate(command: &str, value: &Value) -> Result<(), CliError> {
    let text = schema_text(command).ok_or_else(|| CliError::validation(format!("unknown command {command}")))?;
    let schema: Value = serde_json::from_str(text).expect("shipped schema is valid JSON");
    let validator = jsonschema::validator_for(&schema).expect("shipped schema compiles");
    let errors: Vec<String> = validator
        .iter_errors(value)
        .map(|e| {
            let at = e.instance_path().to_string();
            if at.is_empty() {
                e.to_string()
            } else {
                format!("{at}: {e}")
            }
        })
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(CliError::validation(format!("schema: {}", errors.join("; "))))
    }
}
