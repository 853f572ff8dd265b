//! Output directory bookkeeping and the run manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::SCHEMA_VERSION;
use crate::failure::Failure;

/// Which artifact families to write; all when none were requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Geojson,
}

pub struct Artifacts {
    dir: PathBuf,
    formats: Vec<Format>,
    written: Vec<(String, String)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Pretty JSON with a trailing newline.
pub fn json_bytes<T: Serialize + ?Sized>(v: &T) -> Result<Vec<u8>, Failure> {
    let mut out = serde_json::to_vec_pretty(v).map_err(|e| Failure::io(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

impl Artifacts {
    pub fn create(dir: &Path, formats: &[Format]) -> Result<Self, Failure> {
        std::fs::create_dir_all(dir).map_err(|e| Failure::io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            formats: formats.to_vec(),
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.is_empty() || self.formats.contains(&f)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, Failure> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))?;
        self.written.push((name.to_string(), sha256_hex(bytes)));
        Ok(path)
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, v: &T) -> Result<PathBuf, Failure> {
        self.write(name, &json_bytes(v)?)
    }

    /// Records a file another writer already produced in the output directory.
    pub fn record(&mut self, name: &str) -> Result<(), Failure> {
        let path = self.dir.join(name);
        let bytes = std::fs::read(&path).map_err(|e| Failure::io(format!("cannot read {}: {e}", path.display())))?;
        self.written.push((name.to_string(), sha256_hex(&bytes)));
        Ok(())
    }

    /// Writes `manifest.json`: command, seeds, the resolved configuration
    /// and its hash, and the hash of every artifact. No timestamps, so
    /// repeated runs produce identical bytes.
    pub fn finish<C: Serialize>(mut self, command: &str, seeds: Value, config: &C) -> Result<PathBuf, Failure> {
        let config = serde_json::to_value(config).map_err(|e| Failure::io(e.to_string()))?;
        let config_hash = sha256_hex(&serde_json::to_vec(&config).map_err(|e| Failure::io(e.to_string()))?);
        self.written.sort();
        let artifacts: Vec<Value> = self
            .written
            .iter()
            .map(|(name, hash)| json!({ "path": name, "sha256": hash }))
            .collect();
        let manifest = json!({
            "schema_version": SCHEMA_VERSION,
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "seeds": seeds,
            "config_sha256": config_hash,
            "config": config,
            "artifacts": artifacts,
        });
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, json_bytes(&manifest)?)
            .map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}
