//! Run configuration: one JSON document with the experiment fields at the
//! top level plus an `instance` section for single-draw commands.
//!
//! The file is overlaid on the defaults, then `key=value` overrides are
//! applied by dotted path. Any key absent from the defaults is rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use wew_core::experiment::ExperimentConfig;

use crate::CliError;

/// Selects the draw used by `solve-bs`, `solve-sbs` and fixes the split
/// factors when both are given.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InstanceConfig {
    pub seed_id: u64,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CliConfig {
    pub experiment: ExperimentConfig,
    pub instance: InstanceConfig,
}

/// Short override keys accepted in place of their full paths.
const ALIASES: [(&str, &str); 3] = [
    ("alpha1", "instance.alpha1"),
    ("alpha2", "instance.alpha2"),
    ("seed_id", "instance.seed_id"),
];

pub fn default_document() -> Value {
    let mut doc = serde_json::to_value(ExperimentConfig::default()).expect("config serializes");
    doc.as_object_mut().expect("object").insert(
        "instance".into(),
        serde_json::to_value(InstanceConfig::default()).expect("serializes"),
    );
    doc
}

/// Every settable dotted path. Arrays and `null` defaults are leaves.
pub fn leaf_paths(doc: &Value) -> Vec<String> {
    fn walk(v: &Value, prefix: &str, out: &mut Vec<String>) {
        match v {
            Value::Object(map) if !map.is_empty() => {
                for (k, child) in map {
                    let path = if prefix.is_empty() {
                        k.clone()
                    } else {
                        format!("{prefix}.{k}")
                    };
                    walk(child, &path, out);
                }
            }
            _ => out.push(prefix.to_string()),
        }
    }
    let mut out = Vec::new();
    walk(doc, "", &mut out);
    out.sort();
    out
}

fn unknown_key(key: &str) -> CliError {
    CliError::Usage(format!(
        "unknown configuration key `{key}`; valid keys are:\n  {}\n  (aliases: {})",
        leaf_paths(&default_document()).join("\n  "),
        ALIASES.map(|(a, _)| a).join(", ")
    ))
}

/// Overlays `file` onto `base`, keeping the default's shape.
fn overlay(
    base: &mut Map<String, Value>,
    file: &Map<String, Value>,
    prefix: &str,
) -> Result<(), CliError> {
    for (k, v) in file {
        let path = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match (base.get_mut(k), v) {
            (None, _) => return Err(unknown_key(&path)),
            (Some(Value::Object(b)), Value::Object(f)) => overlay(b, f, &path)?,
            (Some(Value::Object(_)), _) => {
                return Err(CliError::Usage(format!("`{path}` must be a JSON object")))
            }
            (Some(slot), _) => *slot = v.clone(),
        }
    }
    Ok(())
}

fn set_path(doc: &mut Value, path: &str, value: Value) -> Result<(), CliError> {
    let mut node = doc;
    let mut parts = path.split('.').peekable();
    while let Some(part) = parts.next() {
        let map = node.as_object_mut().ok_or_else(|| unknown_key(path))?;
        let child = map.get_mut(part).ok_or_else(|| unknown_key(path))?;
        if parts.peek().is_none() {
            if child.is_object() {
                return Err(unknown_key(path));
            }
            *child = value;
            return Ok(());
        }
        node = child;
    }
    Err(unknown_key(path))
}

/// Parses `key=value`. The value is read as JSON when possible and as a
/// bare string otherwise, so `schemes=["WEW"]` and `averaging=mean_of_db`
/// both work.
pub fn parse_override(raw: &str) -> Result<(String, Value), CliError> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override `{raw}` is not of the form key=value")))?;
    let key = key.trim();
    let key = ALIASES
        .iter()
        .find(|(a, _)| *a == key)
        .map_or(key, |(_, full)| full);
    let value = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
    Ok((key.to_string(), value))
}

pub fn resolve(file: Option<&Value>, overrides: &[String]) -> Result<CliConfig, CliError> {
    let mut doc = default_document();
    if let Some(file) = file {
        let file = file
            .as_object()
            .ok_or_else(|| CliError::Usage("configuration must be a JSON object".into()))?;
        overlay(doc.as_object_mut().expect("object"), file, "")?;
    }
    for raw in overrides {
        let (key, value) = parse_override(raw)?;
        set_path(&mut doc, &key, value)?;
    }

    let mut map = doc.as_object().expect("object").clone();
    let instance = map.remove("instance").unwrap_or(Value::Null);
    let invalid = |e: serde_json::Error| CliError::Usage(format!("invalid configuration: {e}"));
    let experiment: ExperimentConfig =
        serde_json::from_value(Value::Object(map)).map_err(invalid)?;
    let instance: InstanceConfig = serde_json::from_value(instance).map_err(invalid)?;
    experiment
        .validate()
        .map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))?;
    Ok(CliConfig {
        experiment,
        instance,
    })
}

pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<CliConfig, CliError> {
    let file = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?;
            let v: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("{} is not valid JSON: {e}", p.display())))?;
            Some(v)
        }
        None => None,
    };
    resolve(file.as_ref(), overrides)
}
