//! Run manifests: enough provenance to reproduce a run byte for byte —
//! config hash, root seed, derived replica seeds, and a digest per output
//! file. The wall-clock field is informational and excluded from any
//! reproducibility contract.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub path: String,
    pub schema: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub kind: String,
    pub config_hash: String,
    pub root_seed: u64,
    pub replica_seeds: Vec<u64>,
    pub wall_clock_secs: f64,
    pub warnings: Vec<String>,
    pub outputs: Vec<OutputRecord>,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<RunManifest> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Digest-only view used to compare reruns (wall clock excluded).
    pub fn output_digests(&self) -> Vec<(String, String)> {
        self.outputs
            .iter()
            .map(|o| (o.path.clone(), o.sha256.clone()))
            .collect()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects output files under one directory, recording a digest per file.
/// The first file written may be renamed through `primary_name` (CLI
/// `--out some/file.csv` support).
pub struct OutputWriter {
    dir: PathBuf,
    records: Vec<OutputRecord>,
    primary_name: Option<String>,
}

impl OutputWriter {
    pub fn new(dir: &Path) -> Result<OutputWriter> {
        std::fs::create_dir_all(dir)?;
        Ok(OutputWriter {
            dir: dir.to_path_buf(),
            records: Vec::new(),
            primary_name: None,
        })
    }

    pub fn with_primary_name(mut self, name: Option<String>) -> Self {
        self.primary_name = name;
        self
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, schema: &str, bytes: &[u8]) -> Result<()> {
        let name = if self.records.is_empty() {
            self.primary_name.take().unwrap_or_else(|| name.to_string())
        } else {
            name.to_string()
        };
        std::fs::write(self.dir.join(&name), bytes)?;
        self.records.push(OutputRecord {
            path: name,
            schema: schema.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn into_records(self) -> Vec<OutputRecord> {
        self.records
    }
}
