//! Run manifests: enough to re-execute a run exactly.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub argv: Vec<String>,
    pub seed: u64,
    pub jobs: usize,
    pub config_file: Option<PathBuf>,
    pub config: RunConfig,
    /// SHA-256 of every input file; directories hash their sorted listing
    /// of `name:sha256` lines.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, serde_json::Value>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, jobs: usize, config_file: Option<PathBuf>, config: &RunConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            argv: std::env::args().collect(),
            seed,
            jobs,
            config_file,
            config: config.clone(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let digest = hash_path(path)?;
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    pub fn output(&mut self, key: &str, value: impl Serialize) {
        self.outputs.insert(key.to_string(), serde_json::to_value(value).expect("manifest value serializes"));
    }

    /// Writes `<dir>/<command>.manifest.json`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(format!("{}.manifest.json", self.command));
        let text = serde_json::to_string_pretty(self)?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Manifests of earlier runs are skipped so that re-running a command in
/// the same directory does not change its input hash.
pub fn hash_path(path: &Path) -> Result<String> {
    if !path.is_dir() {
        return hash_file(path);
    }
    let mut names: Vec<_> = fs::read_dir(path)
        .with_context(|| format!("listing {}", path.display()))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| !n.ends_with(".manifest.json"))
        .collect();
    names.sort();
    let mut listing = String::new();
    for name in names {
        listing.push_str(&format!("{name}:{}\n", hash_file(&path.join(&name))?));
    }
    Ok(hex::encode(Sha256::digest(listing.as_bytes())))
}
