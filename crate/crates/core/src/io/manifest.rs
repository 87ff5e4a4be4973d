use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Record of a pipeline run: tool version, seeds, parameters and a hash of
/// every file written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seeds: Vec<u64>,
    pub parameters: serde_json::Value,
    pub artifacts: Vec<Artifact>,
}

impl Manifest {
    pub fn new(seeds: Vec<u64>, parameters: serde_json::Value) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seeds,
            parameters,
            artifacts: Vec::new(),
        }
    }

    pub fn add(&mut self, dir: &Path, relative: &str) -> Result<()> {
        let full = dir.join(relative);
        let (sha256, bytes) = sha256_file(&full)?;
        self.artifacts.push(Artifact {
            path: relative.to_string(),
            sha256,
            bytes,
        });
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> Result<(String, u64)> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut total = 0u64;
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        total += n as u64;
        hasher.update(&buf[..n]);
    }
    Ok((hex::encode(hasher.finalize()), total))
}
