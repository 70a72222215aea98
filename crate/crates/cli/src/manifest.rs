use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use blocksim::draws::StreamSeeds;

use crate::request::{Artifact, Invocation, RunResult};

pub const SCHEMA_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub role: String,
    /// Absent when the output went to standard output.
    pub path: Option<PathBuf>,
    pub sha256: String,
    pub bytes: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv_schema: Option<String>,
}

/// Written next to every output; holds what is needed to redo the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub artifact_version: String,
    pub command: String,
    pub invocation: Invocation,
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stream_seeds: Option<StreamSeeds>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    pub duration_secs: f64,
    pub outputs: Vec<OutputRecord>,
    #[serde(default)]
    pub summary: serde_json::Value,
}

impl RunManifest {
    pub fn new(invocation: &Invocation, result: &RunResult, jobs: Option<usize>, elapsed: Duration) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            command: invocation.name().to_string(),
            invocation: invocation.clone(),
            base_seed: invocation.base_seed(),
            stream_seeds: result.stream_seeds,
            jobs,
            duration_secs: elapsed.as_secs_f64(),
            outputs: result.artifacts.iter().map(record).collect(),
            summary: result.summary.clone(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = fs::read(path).with_context(|| format!("reading manifest {}", path.display()))?;
        let manifest: Self =
            serde_json::from_slice(&data).with_context(|| format!("parsing manifest {}", path.display()))?;
        if manifest.schema_version != SCHEMA_VERSION {
            bail!("manifest schema version {} is not supported (expected {SCHEMA_VERSION})", manifest.schema_version);
        }
        Ok(manifest)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut data = serde_json::to_vec_pretty(self)?;
        data.push(b'\n');
        fs::write(path, data).with_context(|| format!("writing manifest {}", path.display()))
    }
}

fn record(a: &Artifact) -> OutputRecord {
    OutputRecord {
        role: a.role.to_string(),
        path: a.path.clone(),
        sha256: sha256_hex(&a.bytes),
        bytes: a.bytes.len() as u64,
        csv_schema: a.csv_schema.map(str::to_string),
    }
}

/// Default manifest location for a primary output: `<output>.manifest.json`.
pub fn manifest_path_for(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DigestCheck {
    pub role: String,
    pub expected: String,
    pub actual: String,
    pub written_to: Option<PathBuf>,
}

impl DigestCheck {
    pub fn matches(&self) -> bool {
        self.expected == self.actual
    }
}

/// Redoes the run described by `manifest` and compares digests. With
/// `out_dir`, the regenerated files are written there under their original
/// file names (standard-output artifacts become `stdout`).
pub fn rerun(manifest: &RunManifest, out_dir: Option<&Path>, jobs: Option<usize>) -> Result<Vec<DigestCheck>> {
    let result = manifest.invocation.execute(jobs)?;
    if result.artifacts.len() != manifest.outputs.len() {
        bail!("rerun produced {} outputs, manifest lists {}", result.artifacts.len(), manifest.outputs.len());
    }
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut checks = Vec::with_capacity(result.artifacts.len());
    for (artifact, expected) in result.artifacts.iter().zip(&manifest.outputs) {
        let written_to = match out_dir {
            Some(dir) => {
                let name = artifact.path.as_ref().and_then(|p| p.file_name()).map_or_else(|| "stdout".into(), |n| n.to_owned());
                let target = dir.join(name);
                fs::write(&target, &artifact.bytes).with_context(|| format!("writing {}", target.display()))?;
                Some(target)
            }
            None => None,
        };
        checks.push(DigestCheck {
            role: expected.role.clone(),
            expected: expected.sha256.clone(),
            actual: sha256_hex(&artifact.bytes),
            written_to,
        });
    }
    Ok(checks)
}
