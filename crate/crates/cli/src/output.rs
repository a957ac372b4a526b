//! Artifact emission under the output directory, plus the manifest.

use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct Artifact {
    path: String,
    bytes: usize,
    sha256: String,
}

#[derive(Serialize)]
struct Input {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    command: &'a [String],
    config: &'a RunConfig,
    config_sha256: String,
    inputs: &'a [Input],
    artifacts: &'a [Artifact],
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects files for one command. Nothing touches the disk without an
/// output directory.
pub struct Sink {
    dir: Option<PathBuf>,
    command: Vec<String>,
    config: RunConfig,
    inputs: Vec<Input>,
    artifacts: Vec<Artifact>,
}

impl Sink {
    pub fn new(config: &RunConfig, command: Vec<String>) -> Self {
        Sink { dir: config.out.clone(), command, config: config.clone(), inputs: Vec::new(), artifacts: Vec::new() }
    }

    /// Read an input file, recording its digest.
    pub fn read_input(&mut self, path: &std::path::Path) -> Result<String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| rankone_core::Error::Io(format!("{}: {e}", path.display())))?;
        self.inputs.push(Input { path: path.display().to_string(), sha256: sha256_hex(text.as_bytes()) });
        Ok(text)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        std::fs::write(dir.join(name), bytes).with_context(|| format!("writing {name}"))?;
        self.artifacts.push(Artifact { path: name.to_string(), bytes: bytes.len(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    pub fn csv(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> rankone_core::Result<()>) -> Result<()> {
        if !self.config.formats.csv || self.dir.is_none() {
            return Ok(());
        }
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }

    pub fn svg(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> rankone_core::Result<()>) -> Result<()> {
        if !self.config.formats.svg || self.dir.is_none() {
            return Ok(());
        }
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }

    pub fn finish(self) -> Result<()> {
        if self.dir.is_none() {
            return Ok(());
        }
        let config_sha256 = sha256_hex(serde_json::to_string(&self.config)?.as_bytes());
        let m = Manifest {
            schema_version: SCHEMA_VERSION,
            command: &self.command,
            config: &self.config,
            config_sha256,
            inputs: &self.inputs,
            artifacts: &self.artifacts,
        };
        let mut s = serde_json::to_string_pretty(&m)?;
        s.push('\n');
        let dir = self.dir.as_ref().expect("checked above");
        std::fs::write(dir.join("manifest.json"), s).context("writing manifest.json")?;
        Ok(())
    }
}
