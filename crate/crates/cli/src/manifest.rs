//! Record of a finished run: which config produced which files.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    /// Output files relative to the run directory.
    pub files: Vec<String>,
    pub wall_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub version: String,
    pub kind: String,
    pub seeds: BTreeMap<u64, SeedRecord>,
    /// Files produced once for the whole run.
    #[serde(default)]
    pub shared_files: Vec<String>,
    pub wall_seconds: f64,
}

impl RunManifest {
    pub fn failed_seeds(&self) -> Vec<u64> {
        self.seeds.iter().filter(|(_, r)| r.error.is_some()).map(|(&s, _)| s).collect()
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Run(e.to_string()))?;
        std::fs::write(dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }

    pub fn read(dir: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(dir.join("manifest.json"))?;
        serde_json::from_str(&text).map_err(|e| CliError::Run(e.to_string()))
    }
}

/// SHA-256 over the config's canonical JSON (object keys sorted), so the
/// hash does not depend on the order of fields in the source file.
pub fn config_hash(config: &RunConfig) -> CliResult<String> {
    let value = canonical(serde_json::to_value(config).map_err(|e| CliError::Config(e.to_string()))?);
    let canonical = serde_json::to_string(&value).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

// explicit sort, in case serde_json is built with insertion-ordered maps
fn canonical(v: serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match v {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, canonical(v))).collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonical).collect()),
        other => other,
    }
}
