use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Timing {
    pub started_unix_ms: u128,
    pub elapsed_ms: u128,
}

/// Written as `manifest.json` next to every command's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, InputDigest>,
    pub seeds: BTreeMap<String, u64>,
    pub outputs: Vec<String>,
    pub summary: serde_json::Value,
    pub timing: Timing,
}

pub struct ManifestBuilder {
    manifest: RunManifest,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str) -> Self {
        let started_unix_ms =
            SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
        Self {
            manifest: RunManifest {
                command: command.into(),
                version: env!("CARGO_PKG_VERSION").into(),
                config: serde_json::Value::Null,
                inputs: BTreeMap::new(),
                seeds: BTreeMap::new(),
                outputs: Vec::new(),
                summary: serde_json::Value::Null,
                timing: Timing { started_unix_ms, elapsed_ms: 0 },
            },
            started: Instant::now(),
        }
    }

    pub fn config<T: Serialize>(&mut self, config: &T) -> &mut Self {
        self.manifest.config = serde_json::to_value(config).unwrap_or_default();
        self
    }

    /// Record a file input by content hash. Inputs that are service URLs
    /// are recorded with an empty digest.
    pub fn input(&mut self, role: &str, path: &Path) -> Result<&mut Self> {
        let sha256 = if path.exists() {
            let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            hex::encode(Sha256::digest(&bytes))
        } else {
            String::new()
        };
        self.manifest.inputs.insert(role.into(), InputDigest { path: path.to_path_buf(), sha256 });
        Ok(self)
    }

    pub fn seed(&mut self, name: &str, value: u64) -> &mut Self {
        self.manifest.seeds.insert(name.into(), value);
        self
    }

    pub fn output(&mut self, name: &str) -> &mut Self {
        self.manifest.outputs.push(name.into());
        self
    }

    pub fn summary<T: Serialize>(&mut self, summary: &T) -> &mut Self {
        self.manifest.summary = serde_json::to_value(summary).unwrap_or_default();
        self
    }

    pub fn write(&mut self, out_dir: &Path) -> Result<()> {
        self.manifest.timing.elapsed_ms = self.started.elapsed().as_millis();
        let path = out_dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&self.manifest)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}
