//! Run manifests and per-artifact provenance sidecars.

use std::path::{Path, PathBuf};
use std::time::SystemTime;

use gan_stability::checkpoint::write_atomic;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Seed and config hash stored next to an artifact as `<file>.meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub kind: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub quick: bool,
}

impl ArtifactMeta {
    pub fn path_for(artifact: &Path) -> PathBuf {
        artifact.with_extension("meta.json")
    }

    pub fn write(&self, artifact: &Path) -> Result<PathBuf, CliError> {
        let path = Self::path_for(artifact);
        write_atomic(&path, (serde_json::to_string_pretty(self)? + "\n").as_bytes())?;
        Ok(path)
    }

    pub fn read(artifact: &Path) -> Result<Self, CliError> {
        let path = Self::path_for(artifact);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub quick: bool,
    pub started_at: String,
    pub finished_at: String,
    pub artifacts: Vec<String>,
}

/// Collects artifacts while a command runs.
pub struct ManifestBuilder {
    command: String,
    config_hash: String,
    seed: u64,
    quick: bool,
    started: SystemTime,
    root: PathBuf,
    artifacts: Vec<String>,
}

impl ManifestBuilder {
    pub fn new(command: &str, config_hash: String, seed: u64, quick: bool, root: &Path) -> Self {
        Self {
            command: command.to_string(),
            config_hash,
            seed,
            quick,
            started: SystemTime::now(),
            root: root.to_path_buf(),
            artifacts: Vec::new(),
        }
    }

    pub fn add(&mut self, path: &Path) {
        let rel = path.strip_prefix(&self.root).unwrap_or(path);
        let s = rel.to_string_lossy().replace('\\', "/");
        if !self.artifacts.contains(&s) {
            self.artifacts.push(s);
        }
    }

    pub fn extend(&mut self, other: &[String]) {
        for a in other {
            if !self.artifacts.contains(a) {
                self.artifacts.push(a.clone());
            }
        }
    }

    pub fn artifacts(&self) -> &[String] {
        &self.artifacts
    }

    /// Writes `manifests/<command>.json` under the output root.
    pub fn finish(self) -> Result<PathBuf, CliError> {
        let manifest = RunManifest {
            command: self.command.clone(),
            config_hash: self.config_hash,
            seed: self.seed,
            version: VERSION.to_string(),
            quick: self.quick,
            started_at: humantime::format_rfc3339_seconds(self.started).to_string(),
            finished_at: humantime::format_rfc3339_seconds(SystemTime::now()).to_string(),
            artifacts: self.artifacts,
        };
        let dir = self.root.join("manifests");
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let path = dir.join(format!("{}.json", self.command));
        write_atomic(&path, (serde_json::to_string_pretty(&manifest)? + "\n").as_bytes())?;
        Ok(path)
    }
}
