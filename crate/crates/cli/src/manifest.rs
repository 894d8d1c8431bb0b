use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "run_manifest.json";

/// Provenance record written once per run, next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: &'static str,
    pub tool_version: &'static str,
    pub seed: u64,
    pub config: Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<OutputFile>,
    pub results: Map<String, Value>,
    pub duration_secs: f64,
}

#[derive(Debug, Serialize)]
pub struct OutputFile {
    pub path: PathBuf,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub struct ManifestBuilder {
    started: Instant,
    manifest: RunManifest,
}

impl ManifestBuilder {
    pub fn new(subcommand: &'static str, seed: u64, config: &impl Serialize) -> anyhow::Result<Self> {
        Ok(Self {
            started: Instant::now(),
            manifest: RunManifest {
                subcommand,
                tool_version: env!("CARGO_PKG_VERSION"),
                seed,
                config: serde_json::to_value(config)?,
                inputs: Vec::new(),
                outputs: Vec::new(),
                results: Map::new(),
                duration_secs: 0.0,
            },
        })
    }

    pub fn input(&mut self, path: &Path) {
        self.manifest.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) -> anyhow::Result<()> {
        let bytes = std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
        self.manifest.outputs.push(OutputFile { path: path.to_path_buf(), sha256: sha256_hex(&bytes) });
        Ok(())
    }

    pub fn result(&mut self, key: &str, value: impl Serialize) -> anyhow::Result<()> {
        self.manifest.results.insert(key.to_owned(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn write(mut self, dir: &Path) -> anyhow::Result<PathBuf> {
        self.manifest.duration_secs = self.started.elapsed().as_secs_f64();
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        p2ad::data::write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}
