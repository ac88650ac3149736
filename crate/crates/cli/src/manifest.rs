//! Run manifests and artifact writing.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, SeedSource};
use crate::{CliError, Command, TOOL_NAME, VERSION};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArtifactEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: Command,
    /// The effective config (seed override applied); absent for `reproduce`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<ExperimentConfig>,
    /// SHA-256 of the compact JSON of `config`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed_source: Option<SeedSource>,
    pub threads: usize,
    pub wall_time_seconds: f64,
    pub artifacts: Vec<ArtifactEntry>,
}

impl Manifest {
    pub fn new(command: Command, config: Option<ExperimentConfig>, seed_source: Option<SeedSource>, threads: usize) -> Self {
        let config_sha256 = config
            .as_ref()
            .map(|c| sha256_hex(&serde_json::to_vec(c).expect("config serializes")));
        Self {
            tool: TOOL_NAME,
            version: VERSION,
            command,
            config,
            config_sha256,
            seed_source,
            threads,
            wall_time_seconds: 0.0,
            artifacts: Vec::new(),
        }
    }

    /// Writes `out/name` and records its digest.
    pub fn write_artifact(&mut self, out: &Path, name: &str, contents: &[u8]) -> Result<(), CliError> {
        std::fs::write(out.join(name), contents)?;
        self.artifacts.push(ArtifactEntry {
            file: name.to_string(),
            sha256: sha256_hex(contents),
            bytes: contents.len(),
        });
        Ok(())
    }

    /// Writes a JSON artifact with `config_sha256` stamped in.
    pub fn write_json(&mut self, out: &Path, name: &str, mut value: serde_json::Value) -> Result<(), CliError> {
        if let (Some(obj), Some(h)) = (value.as_object_mut(), &self.config_sha256) {
            obj.insert("config_sha256".into(), serde_json::Value::String(h.clone()));
        }
        let mut text = serde_json::to_string_pretty(&value).expect("artifact serializes");
        text.push('\n');
        self.write_artifact(out, name, text.as_bytes())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn write(&self, out: &Path) -> Result<(), CliError> {
        std::fs::write(out.join("manifest.json"), self.to_json())?;
        Ok(())
    }
}
