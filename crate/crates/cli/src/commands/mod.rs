pub mod data;
pub mod report;
pub mod score;
pub mod sweep;
pub mod train;

use serde_json::Value;

use datadiet::provenance::{config_hash, provenance_json};

/// Provenance block for a command's outputs: tool, hash of `config`, and `config` itself.
pub fn stamp(command: &str, config: Value) -> (String, Value) {
    let hash = config_hash(&config);
    let mut p = provenance_json(&hash);
    p["command"] = Value::from(command);
    p["config"] = config;
    (hash, p)
}
