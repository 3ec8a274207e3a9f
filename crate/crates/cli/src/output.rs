//! Output layout and the versioned JSON envelope every artifact shares.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use logguard::config::RunConfig;
use serde::Serialize;
use serde_json::{json, Value};

pub const SCHEMA_VERSION: u32 = 1;

pub const LOG_FILE: &str = "access.log";
pub const LABELS_FILE: &str = "labels.csv";
pub const DATASET_SUMMARY: &str = "dataset.json";
pub const EPISODES_FILE: &str = "episodes.csv";
pub const POLICY_FILE: &str = "policy.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const COMPARISON_FILE: &str = "comparison.json";

pub struct DatasetPaths {
    pub log: PathBuf,
    pub labels: PathBuf,
    pub summary: PathBuf,
}

impl DatasetPaths {
    pub fn new(dir: &Path) -> Self {
        Self {
            log: dir.join(LOG_FILE),
            labels: dir.join(LABELS_FILE),
            summary: dir.join(DATASET_SUMMARY),
        }
    }

    pub fn require(&self) -> Result<()> {
        let missing: Vec<String> = [&self.log, &self.labels]
            .iter()
            .filter(|p| !p.is_file())
            .map(|p| p.display().to_string())
            .collect();
        if !missing.is_empty() {
            bail!(
                "dataset not found (missing {}); run `logguard generate` first",
                missing.join(", ")
            );
        }
        Ok(())
    }
}

/// `{schema_version, command, config, ...payload}`.
pub fn envelope(command: &str, config: &RunConfig, payload: impl Serialize) -> Result<Value> {
    let mut value = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": config,
    });
    let payload = serde_json::to_value(payload)?;
    if let (Some(obj), Value::Object(extra)) = (value.as_object_mut(), payload) {
        obj.extend(extra);
    }
    Ok(value)
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    match value.get("schema_version").and_then(Value::as_u64) {
        Some(v) if v == u64::from(SCHEMA_VERSION) => Ok(value),
        other => bail!("{}: unsupported schema_version {other:?}", path.display()),
    }
}
