//! JSON config loading, `key=value` overrides and manifest detection.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub fn load(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

/// JSON when it parses, a plain string otherwise.
pub fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Applies `a.b.c=value`, creating intermediate objects as needed.
pub fn apply_override(config: &mut Value, assignment: &str) -> Result<()> {
    let Some((key, raw)) = assignment.split_once('=') else {
        bail!("override `{assignment}` is not of the form key=value");
    };
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("override `{assignment}` has an empty key");
    }
    let mut node = config;
    for (i, part) in parts.iter().enumerate() {
        if !node.is_object() {
            if node.is_null() {
                *node = Value::Object(Map::new());
            } else {
                bail!("override `{assignment}`: `{}` is not an object", parts[..i].join("."));
            }
        }
        let map = node.as_object_mut().expect("checked above");
        if i + 1 == parts.len() {
            map.insert(part.to_string(), parse_value(raw.trim()));
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert(Value::Null);
    }
    unreachable!("split always yields a part")
}

/// Written next to every set of artifacts; sufficient to re-run the job.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    /// Fully resolved config, defaults and overrides included.
    pub config: Value,
    pub overrides: Vec<String>,
    pub rng_algorithm: String,
    pub tool_version: String,
    pub wall_time_seconds: f64,
    pub timestamp_unix: u64,
    pub artifacts: Vec<String>,
}

impl Manifest {
    /// A manifest, if `value` looks like one.
    pub fn detect(value: &Value) -> Option<Manifest> {
        let obj = value.as_object()?;
        if !(obj.contains_key("command") && obj.contains_key("config") && obj.contains_key("rng_algorithm")) {
            return None;
        }
        serde_json::from_value(value.clone()).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn overrides() {
        let mut v = json!({"epsilon": 0.25, "tolerances": {"deviation": 0.05}});
        apply_override(&mut v, "epsilon=0.5").unwrap();
        apply_override(&mut v, "tolerances.deviation=0.1").unwrap();
        apply_override(&mut v, "model.variant=independent_uniform").unwrap();
        apply_override(&mut v, "n_grid=[64,128]").unwrap();
        assert_eq!(
            v,
            json!({
                "epsilon": 0.5,
                "tolerances": {"deviation": 0.1},
                "model": {"variant": "independent_uniform"},
                "n_grid": [64, 128]
            })
        );
        assert!(apply_override(&mut v, "epsilon").is_err());
        assert!(apply_override(&mut v, "=3").is_err());
        assert!(apply_override(&mut v, "epsilon.x=3").is_err());
    }

    #[test]
    fn manifest_detection() {
        assert!(Manifest::detect(&json!({"epsilon": 0.2})).is_none());
        let m = Manifest {
            command: "fit".into(),
            config: json!({}),
            overrides: vec![],
            rng_algorithm: "x".into(),
            tool_version: "0".into(),
            wall_time_seconds: 0.0,
            timestamp_unix: 0,
            artifacts: vec![],
        };
        assert_eq!(Manifest::detect(&serde_json::to_value(&m).unwrap()), Some(m));
    }
}
