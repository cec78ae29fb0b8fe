use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde_json::{json, Value};

/// Facts about a run that are not expected to reproduce.
pub fn metadata() -> Value {
    let finished = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0);
    json!({
        "threads": rayon::current_num_threads(),
        "finished_unix_ms": finished,
        "version": env!("CARGO_PKG_VERSION"),
    })
}

pub fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_json(path: &Path, value: &Value) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

/// Attach `config` and `metadata` to a JSON object.
pub fn with_provenance(mut value: Value, config: Value) -> Value {
    if let Value::Object(map) = &mut value {
        map.insert("config".into(), config);
        map.insert("metadata".into(), metadata());
    }
    value
}

/// Where provenance goes for artifacts that are not JSON objects.
pub fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub fn write_sidecar(path: &Path, config: Value) -> anyhow::Result<()> {
    write_json(&sidecar(path), &with_provenance(json!({}), config))
}
