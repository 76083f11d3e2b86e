//! Content hashes and provenance stamps for output files.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Lowercase hex SHA-256 of `bytes`, truncated to 16 characters.
pub fn short_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Hash of the canonical JSON rendering of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config types serialize to JSON");
    short_hash(&json)
}

/// One-line comment header placed at the top of CSV reports.
pub fn csv_header_line(config_hash: &str) -> String {
    format!("# {} config={}\n", crate::TOOL_VERSION, config_hash)
}

/// JSON provenance block attached to manifests and logs.
pub fn provenance_json(config_hash: &str) -> serde_json::Value {
    serde_json::json!({
        "tool": crate::TOOL_VERSION,
        "config_hash": config_hash,
    })
}
