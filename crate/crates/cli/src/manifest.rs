// SPDX-License-Identifier: MIT OR Apache-2.0

//! Run manifest: what was run, with which settings, on which inputs, and
//! what it produced. The schema is described in `docs/run-manifest.md`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{runtime, CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_DIR: &str = "manifests";

/// Seed for one component of a run, from the run seed and a stable name.
pub fn derive_seed(base: u64, component: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update(component.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 is 32 bytes"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

fn digest_file(path: &Path, shown: String) -> CliResult<FileDigest> {
    let bytes = std::fs::read(path).map_err(|e| runtime(format!("cannot read {}: {e}", path.display())))?;
    Ok(FileDigest {
        path: shown,
        sha256: sha256_hex(&bytes),
        bytes: bytes.len() as u64,
    })
}

#[derive(Debug, Serialize)]
pub struct Seeds {
    pub base: u64,
    pub components: BTreeMap<String, u64>,
}

#[derive(Debug, Serialize)]
struct Tool {
    name: &'static str,
    version: &'static str,
}

#[derive(Debug, Serialize)]
struct ManifestDoc<'a> {
    schema_version: u32,
    tool: Tool,
    command: &'a str,
    argv: &'a [String],
    status: &'a str,
    error: Option<String>,
    config_sha256: &'a str,
    config: &'a RunConfig,
    seeds: &'a Seeds,
    inputs: &'a [FileDigest],
    artifacts: &'a [FileDigest],
}

/// Collects inputs, seeds and artifacts while a command runs.
#[derive(Debug)]
pub struct RunRecord {
    pub command: String,
    pub argv: Vec<String>,
    pub out: PathBuf,
    seeds: BTreeMap<String, u64>,
    inputs: Vec<FileDigest>,
    artifacts: Vec<FileDigest>,
}

impl RunRecord {
    pub fn new(command: &str, argv: Vec<String>, out: PathBuf) -> Self {
        Self {
            command: command.to_string(),
            argv,
            out,
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn seed(&mut self, base: u64, component: &str) -> u64 {
        let s = derive_seed(base, component);
        self.seeds.insert(component.to_string(), s);
        s
    }

    pub fn input(&mut self, path: &Path) -> CliResult<()> {
        if self.inputs.iter().any(|d| Path::new(&d.path) == path) {
            return Ok(());
        }
        let d = digest_file(path, path.display().to_string())?;
        self.inputs.push(d);
        Ok(())
    }

    /// Writes `bytes` to `path` and records it as an artifact.
    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> CliResult<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .map_err(|e| runtime(format!("cannot create {}: {e}", parent.display())))?;
        }
        std::fs::write(path, bytes).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))?;
        self.record(path)
    }

    /// Records a file some other writer produced. Paths under the output
    /// directory are listed relative to it.
    pub fn record(&mut self, path: &Path) -> CliResult<()> {
        let shown = path.strip_prefix(&self.out).unwrap_or(path);
        let d = digest_file(path, shown.to_string_lossy().replace('\\', "/"))?;
        self.artifacts.retain(|a| a.path != d.path);
        self.artifacts.push(d);
        Ok(())
    }

    /// File name of this command's manifest, e.g. `vocab-build.json`.
    pub fn manifest_path(&self) -> PathBuf {
        self.out
            .join(MANIFEST_DIR)
            .join(format!("{}.json", self.command.replace(' ', "-")))
    }

    pub fn finish(mut self, cfg: &RunConfig, outcome: Option<&CliError>) -> CliResult<PathBuf> {
        self.inputs.sort_by(|a, b| a.path.cmp(&b.path));
        self.artifacts.sort_by(|a, b| a.path.cmp(&b.path));
        let hash = config_hash(cfg)?;
        let seeds = Seeds {
            base: cfg.seed,
            components: std::mem::take(&mut self.seeds),
        };
        let doc = ManifestDoc {
            schema_version: SCHEMA_VERSION,
            tool: Tool {
                name: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
            },
            command: &self.command,
            argv: &self.argv,
            status: outcome.map_or("ok", |e| e.status()),
            error: outcome.map(|e| e.to_string()),
            config_sha256: &hash,
            config: cfg,
            seeds: &seeds,
            inputs: &self.inputs,
            artifacts: &self.artifacts,
        };
        let mut text = serde_json::to_string_pretty(&doc).map_err(|e| runtime(e.to_string()))?;
        text.push('\n');
        let path = self.manifest_path();
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .map_err(|e| runtime(format!("cannot create {}: {e}", parent.display())))?;
        }
        std::fs::write(&path, text).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}

/// SHA-256 of the config's JSON form with `jobs` and `out` blanked, since
/// neither changes results.
pub fn config_hash(cfg: &RunConfig) -> CliResult<String> {
    let mut canonical = cfg.clone();
    canonical.jobs = 0;
    canonical.out = PathBuf::new();
    if canonical.probes.is_none() {
        canonical.probes = Some(PathBuf::from("<out>/probes"));
    }
    let bytes = serde_json::to_vec(&canonical).map_err(|e| runtime(e.to_string()))?;
    Ok(sha256_hex(&bytes))
}
