//! JSON run manifest: config echo, per-task status and timing, emitted files
//! with checksums, and convergence diagnostics.

use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Complete,
    Failed,
    NotRun,
}

#[derive(Clone, Debug, Serialize)]
pub struct TaskRecord {
    pub name: String,
    pub status: Status,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub library_version: &'static str,
    pub config: Value,
    pub config_sha256: String,
    pub complete: bool,
    pub tasks: Vec<TaskRecord>,
    pub files: Vec<FileRecord>,
    pub diagnostics: Map<String, Value>,
}

impl Manifest {
    pub fn new(config: Value, config_bytes: &[u8]) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            library_version: ttn_gibbs::VERSION,
            config,
            config_sha256: sha256_hex(config_bytes),
            complete: false,
            tasks: Vec::new(),
            files: Vec::new(),
            diagnostics: Map::new(),
        }
    }

    pub fn add_file(&mut self, name: &str, bytes: &[u8]) {
        self.files.push(FileRecord { path: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() });
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        self.diagnostics.insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}
