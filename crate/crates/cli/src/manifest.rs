use std::collections::BTreeMap;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Provenance embedded in every report.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// Input name to file path, or `builtin`.
    pub inputs: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub version: String,
    pub timestamp: String,
    /// SHA-256 over command, parameters and input file contents.
    pub config_hash: String,
}

/// Accumulates what a run read and how it was configured.
pub struct ManifestBuilder {
    command: String,
    inputs: BTreeMap<String, String>,
    digests: BTreeMap<String, String>,
    parameters: BTreeMap<String, Value>,
    seed: Option<u64>,
}

impl ManifestBuilder {
    pub fn new(command: &str) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            inputs: BTreeMap::new(),
            digests: BTreeMap::new(),
            parameters: BTreeMap::new(),
            seed: None,
        }
    }

    pub fn input(&mut self, name: &str, source: &str, bytes: &[u8]) {
        self.inputs.insert(name.to_string(), source.to_string());
        self.digests.insert(name.to_string(), hex::encode(Sha256::digest(bytes)));
    }

    pub fn builtin(&mut self, name: &str) {
        self.inputs.insert(name.to_string(), crate::args::BUILTIN.to_string());
    }

    pub fn param(&mut self, name: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.parameters.insert(name.to_string(), v);
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.param("seed", seed);
    }

    pub fn finish(self) -> RunManifest {
        let canonical = serde_json::json!({
            "command": self.command,
            "inputs": self.inputs,
            "digests": self.digests,
            "parameters": self.parameters,
        });
        let config_hash = hex::encode(Sha256::digest(canonical.to_string().as_bytes()));
        RunManifest {
            command: self.command,
            inputs: self.inputs,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: timestamp(),
            config_hash,
        }
    }
}

/// UTC now, or `SOURCE_DATE_EPOCH` when set for reproducible builds.
fn timestamp() -> String {
    let at = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse::<i64>().ok())
        .and_then(|s| DateTime::<Utc>::from_timestamp(s, 0))
        .unwrap_or_else(Utc::now);
    at.to_rfc3339_opts(SecondsFormat::Secs, true)
}
