//! The `manifest.json` record written beside every command's outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use skm_core::io::write_json;
use skm_core::SkmError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub flags: Value,
    pub seeds: Vec<u64>,
    pub threads: usize,
    /// File name to SHA-256 of every input read.
    pub inputs: BTreeMap<String, String>,
    /// File name to SHA-256 of every output written, manifest excluded.
    pub outputs: BTreeMap<String, String>,
    pub wall_time_secs: f64,
    pub diagnostics: Value,
}

pub fn sha256_file(path: &Path) -> Result<String, SkmError> {
    let bytes = std::fs::read(path).map_err(|e| SkmError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

/// Collects what a command read and wrote, then writes the manifest.
pub struct Run {
    out_dir: PathBuf,
    start: Instant,
    manifest: RunManifest,
}

impl Run {
    /// Creates `out_dir` if needed.
    pub fn start(
        command: &str,
        flags: &impl Serialize,
        seeds: Vec<u64>,
        out_dir: &Path,
    ) -> Result<Run, SkmError> {
        std::fs::create_dir_all(out_dir).map_err(|e| SkmError::Io {
            path: out_dir.display().to_string(),
            msg: e.to_string(),
        })?;
        Ok(Run {
            out_dir: out_dir.to_path_buf(),
            start: Instant::now(),
            manifest: RunManifest {
                command: command.into(),
                version: env!("CARGO_PKG_VERSION").into(),
                flags: serde_json::to_value(flags).expect("flags serialize"),
                seeds,
                threads: rayon::current_num_threads(),
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
                wall_time_secs: 0.0,
                diagnostics: Value::Null,
            },
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<(), SkmError> {
        let hash = sha256_file(path)?;
        self.manifest
            .inputs
            .insert(path.display().to_string(), hash);
        Ok(())
    }

    /// Path of output `name` inside the output directory.
    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Records an output already written under `name`.
    pub fn output(&mut self, name: &str) -> Result<(), SkmError> {
        let hash = sha256_file(&self.path(name))?;
        self.manifest.outputs.insert(name.into(), hash);
        Ok(())
    }

    pub fn finish(mut self, diagnostics: Value) -> Result<(), SkmError> {
        self.manifest.wall_time_secs = self.start.elapsed().as_secs_f64();
        self.manifest.diagnostics = diagnostics;
        write_json(&self.out_dir.join(MANIFEST), &self.manifest)
    }
}
