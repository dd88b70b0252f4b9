//! `RunManifest`: what produced a set of files and from which inputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use addlab_core::io_util::{read_file, sha256_hex, write_atomic};
use anyhow::Result;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: Vec<String>,
    pub config_digest: String,
    pub seeds: Vec<u64>,
    pub deterministic: bool,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub wall_clock_ms: u128,
}

/// Collects inputs, outputs and seeds while a command runs.
pub struct Run {
    started: Instant,
    manifest: RunManifest,
}

fn digest_of(path: &Path) -> Result<FileDigest> {
    Ok(FileDigest { path: path.display().to_string(), sha256: sha256_hex(&read_file(path)?) })
}

impl Run {
    pub fn start<A: Serialize>(argv: &[String], args: &A) -> Self {
        let config = serde_json::to_vec(args).expect("arguments serialize");
        Self {
            started: Instant::now(),
            manifest: RunManifest {
                tool: "addlab",
                version: env!("CARGO_PKG_VERSION"),
                command: argv.to_vec(),
                config_digest: sha256_hex(&config),
                seeds: Vec::new(),
                deterministic: true,
                inputs: Vec::new(),
                outputs: Vec::new(),
                wall_clock_ms: 0,
            },
        }
    }

    pub fn seed(&mut self, seed: u64) {
        if !self.manifest.seeds.contains(&seed) {
            self.manifest.seeds.push(seed);
        }
    }

    pub fn deterministic(&mut self, yes: bool) {
        self.manifest.deterministic &= yes;
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.manifest.inputs.push(digest_of(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        self.manifest.outputs.push(digest_of(path)?);
        Ok(())
    }

    /// Writes the manifest atomically to `path`.
    pub fn finish(mut self, path: &Path) -> Result<PathBuf> {
        self.manifest.wall_clock_ms = self.started.elapsed().as_millis();
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        write_atomic(path, text.as_bytes())?;
        Ok(path.to_path_buf())
    }
}

/// `<file>.run.json` beside a single output file.
pub fn beside(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".run.json");
    output.with_file_name(name)
}
