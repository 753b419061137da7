//! Run directories and the manifest that ties their artifacts together.
//!
//! Every file a command writes under its run directory is recorded exactly
//! once, with a SHA-256 of its contents. Paths are relative to the run
//! directory and the manifest carries no timestamps, so two runs with the
//! same inputs produce byte-identical manifests.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::formats::{write_file, FormatError};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_FORMAT: &str = "iotgen-run";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the run directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub status: StageStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    pub artifacts: Vec<Artifact>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub command: String,
    pub seed: u64,
    /// The resolved run configuration.
    pub config: Artifact,
    pub stages: Vec<Stage>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest, FormatError> {
        let text = std::fs::read_to_string(path).map_err(|source| FormatError::Io { path: path.into(), source })?;
        serde_json::from_str(&text).map_err(|e| FormatError::Invalid { path: path.into(), detail: e.to_string() })
    }

    pub fn artifacts(&self) -> impl Iterator<Item = &Artifact> {
        std::iter::once(&self.config).chain(self.stages.iter().flat_map(|s| &s.artifacts))
    }

    pub fn completed_stages(&self) -> usize {
        self.stages.iter().filter(|s| s.status == StageStatus::Completed).count()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes artifacts under one directory and records them as it goes.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    command: String,
    seed: u64,
    config: Option<Artifact>,
    stages: Vec<Stage>,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>, command: &str, seed: u64) -> Self {
        RunDir { root: root.into(), command: command.into(), seed, config: None, stages: Vec::new() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn artifact(&self, rel: &str, bytes: &[u8]) -> Result<Artifact, FormatError> {
        write_file(&self.path(rel), bytes)?;
        Ok(Artifact { path: rel.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 })
    }

    pub fn write_config(&mut self, json: &str) -> Result<(), FormatError> {
        self.config = Some(self.artifact("config.json", json.as_bytes())?);
        Ok(())
    }

    pub fn begin(&mut self, name: &str) {
        self.stages.push(Stage { name: name.into(), status: StageStatus::Completed, error: None, artifacts: Vec::new() });
    }

    fn current(&mut self) -> &mut Stage {
        self.stages.last_mut().expect("begin() a stage before writing artifacts")
    }

    /// Writes `bytes` at `rel` and records it under the current stage.
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf, FormatError> {
        let a = self.artifact(rel, bytes)?;
        self.current().artifacts.push(a);
        Ok(self.path(rel))
    }

    /// Records a file some other writer already put at `rel`.
    pub fn adopt(&mut self, rel: &str) -> Result<PathBuf, FormatError> {
        let path = self.path(rel);
        let bytes = std::fs::read(&path).map_err(|source| FormatError::Io { path: path.clone(), source })?;
        let a = Artifact { path: rel.to_string(), sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 };
        self.current().artifacts.push(a);
        Ok(path)
    }

    pub fn fail(&mut self, error: impl ToString) {
        let s = self.current();
        s.status = StageStatus::Failed;
        s.error = Some(error.to_string());
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            format: MANIFEST_FORMAT.into(),
            version: 1,
            command: self.command.clone(),
            seed: self.seed,
            config: self.config.clone().unwrap_or(Artifact { path: String::new(), sha256: String::new(), bytes: 0 }),
            stages: self.stages.clone(),
        }
    }

    pub fn finish(&self) -> Result<PathBuf, FormatError> {
        let mut text = serde_json::to_string_pretty(&self.manifest()).expect("manifest serializes");
        text.push('\n');
        let path = self.path(MANIFEST_FILE);
        write_file(&path, text.as_bytes())?;
        Ok(path)
    }
}
