use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self, CliError> {
        let mut file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
        let mut hasher = Sha256::new();
        let mut buf = vec![0u8; 1 << 16];
        let mut bytes = 0u64;
        loop {
            let n = file.read(&mut buf).map_err(|e| CliError::io(path, e))?;
            if n == 0 {
                break;
            }
            hasher.update(&buf[..n]);
            bytes += n as u64;
        }
        Ok(FileDigest {
            path: path.to_path_buf(),
            sha256: format!("{:x}", hasher.finalize()),
            bytes,
        })
    }
}

/// Everything needed to repeat a run. Two runs whose manifests agree on
/// config, seed and input digests write identical outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub config: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started: String,
    pub finished: String,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub struct Recorder {
    manifest: RunManifest,
}

impl Recorder {
    pub fn start(subcommand: &str, config: BTreeMap<String, String>) -> Self {
        let seed = config.get("seed").and_then(|s| s.parse().ok());
        Recorder {
            manifest: RunManifest {
                subcommand: subcommand.to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                config,
                seed,
                inputs: Vec::new(),
                outputs: Vec::new(),
                started: now(),
                finished: String::new(),
            },
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        if !self.manifest.inputs.iter().any(|d| d.path == path) {
            self.manifest.inputs.push(FileDigest::of(path)?);
        }
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<(), CliError> {
        self.manifest.outputs.push(FileDigest::of(path)?);
        Ok(())
    }

    /// Writes the manifest next to `anchor` as `<anchor>.manifest.json`.
    pub fn finish(mut self, anchor: &Path) -> Result<PathBuf, CliError> {
        self.manifest.finished = now();
        let path = sidecar(anchor, "manifest.json");
        let json = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        write_file(&path, json.as_bytes())?;
        Ok(path)
    }
}

/// `<path>.<suffix>`, keeping any existing extension.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |e| CliError::io(path, e)
}
