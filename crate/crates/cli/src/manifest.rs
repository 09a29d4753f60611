use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct InputHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Timing {
    pub started_unix: f64,
    pub elapsed_seconds: f64,
}

/// Everything needed to rerun a command: written as JSON beside its output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub argv: Vec<String>,
    pub config: Value,
    pub seed: Option<u64>,
    pub inputs: Vec<InputHash>,
    pub outputs: Vec<String>,
    pub timing: Timing,
}

pub struct ManifestBuilder {
    command: String,
    config: Value,
    seed: Option<u64>,
    inputs: Vec<InputHash>,
    started: SystemTime,
    clock: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            config: Value::Null,
            seed: None,
            inputs: Vec::new(),
            started: SystemTime::now(),
            clock: Instant::now(),
        }
    }

    pub fn config(&mut self, config: impl Serialize) -> Result<&mut Self> {
        self.config = serde_json::to_value(config)?;
        Ok(self)
    }

    pub fn seed(&mut self, seed: u64) -> &mut Self {
        self.seed = Some(seed);
        self
    }

    pub fn input(&mut self, path: &Path) -> Result<&mut Self> {
        self.inputs.push(InputHash {
            path: path.display().to_string(),
            sha256: hash_file(path)?,
        });
        Ok(self)
    }

    pub fn inputs<'a>(&mut self, paths: impl IntoIterator<Item = &'a PathBuf>) -> Result<&mut Self> {
        for p in paths {
            self.input(p)?;
        }
        Ok(self)
    }

    /// Finishes timing and writes the manifest to `path`.
    pub fn write(&self, path: &Path, outputs: &[&Path]) -> Result<()> {
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: self.command.clone(),
            argv: std::env::args().collect(),
            config: self.config.clone(),
            seed: self.seed,
            inputs: self.inputs.clone(),
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
            timing: Timing {
                started_unix: self
                    .started
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs_f64())
                    .unwrap_or(0.0),
                elapsed_seconds: self.clock.elapsed().as_secs_f64(),
            },
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}

pub fn hash_file(path: &Path) -> Result<String> {
    let file = File::open(path).with_context(|| format!("hashing {}", path.display()))?;
    let mut reader = BufReader::new(file);
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = reader.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// `out.mgs` -> `out.mgs.manifest.json`; directories get `manifest.json` inside.
pub fn manifest_path(output: &Path) -> PathBuf {
    if output.is_dir() {
        return output.join("manifest.json");
    }
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}
