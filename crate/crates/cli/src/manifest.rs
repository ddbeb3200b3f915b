//! Run manifests and manifest-stamped output files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Everything needed to reproduce a run. The hash covers all fields except
/// the timestamp, which honours `SOURCE_DATE_EPOCH` when set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub seed: u64,
    pub version: String,
    pub timestamp_unix: u64,
    pub manifest_hash: String,
}

impl RunManifest {
    pub fn new(command: &str, config: Value, seed: u64) -> Self {
        let version = env!("CARGO_PKG_VERSION").to_string();
        let manifest_hash = manifest_hash(command, &config, seed, &version);
        let timestamp_unix = std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or_else(|| {
                SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0)
            });
        Self {
            command: command.to_string(),
            config,
            seed,
            version,
            timestamp_unix,
            manifest_hash,
        }
    }

    pub fn verify(&self) -> bool {
        self.manifest_hash == manifest_hash(&self.command, &self.config, self.seed, &self.version)
    }
}

pub fn manifest_hash(command: &str, config: &Value, seed: u64, version: &str) -> String {
    // serde_json maps are key-sorted, so this serialization is canonical.
    let canonical =
        json!({ "command": command, "config": config, "seed": seed, "version": version });
    hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
}

/// Writes files into one run directory, stamping each with the manifest hash.
pub struct OutputDir {
    dir: PathBuf,
    hash: String,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(dir: &Path, manifest: &RunManifest) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut out = Self {
            dir: dir.to_path_buf(),
            hash: manifest.manifest_hash.clone(),
            written: Vec::new(),
        };
        let text = serde_json::to_string_pretty(manifest).map_err(CliError::internal)?;
        out.write_text("manifest.json", &(text + "\n"))?;
        Ok(out)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    /// Writes `value` (which must serialize to an object) with a
    /// `manifest_hash` field added.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut v = serde_json::to_value(value).map_err(CliError::internal)?;
        match v.as_object_mut() {
            Some(map) => {
                map.insert("manifest_hash".into(), Value::String(self.hash.clone()));
            }
            None => return Err(CliError::internal("output JSON must be an object")),
        }
        let text = serde_json::to_string_pretty(&v).map_err(CliError::internal)?;
        self.write_text(name, &(text + "\n"))
    }

    /// Writes a CSV table preceded by a `# manifest_hash=` comment line.
    pub fn csv<R: AsRef<[String]>>(
        &mut self,
        name: &str,
        header: &[&str],
        rows: &[R],
    ) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(CliError::internal)?;
        for r in rows {
            w.write_record(r.as_ref()).map_err(CliError::internal)?;
        }
        let body = String::from_utf8(w.into_inner().map_err(CliError::internal)?)
            .map_err(CliError::internal)?;
        self.write_text(name, &format!("# manifest_hash={}\n{body}", self.hash))
    }
}
