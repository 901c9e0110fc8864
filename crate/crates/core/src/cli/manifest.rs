use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Record of one command invocation, written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 (hex) over every input file and the effective flags.
    pub config_digest: String,
    /// Output file names, relative to the output directory.
    pub outputs: Vec<String>,
    pub version: String,
    /// Parsed configuration and effective flags.
    pub inputs: Value,
}

/// Accumulates the bytes a run depends on. Each item is length-prefixed
/// and tagged, so no two distinct input sets hash the same stream.
#[derive(Default)]
pub struct InputDigest {
    hasher: Sha256,
}

impl InputDigest {
    pub fn add(&mut self, tag: &str, bytes: &[u8]) {
        for part in [tag.as_bytes(), bytes] {
            self.hasher.update((part.len() as u64).to_le_bytes());
            self.hasher.update(part);
        }
    }

    pub fn finish(self) -> String {
        hex::encode(self.hasher.finalize())
    }
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(path, e))
    }

    /// Checks that every listed output exists and is non-empty.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for name in &self.outputs {
            let path = dir.join(name);
            let len = std::fs::metadata(&path).map_err(|e| Error::io(&path, e))?.len();
            if len == 0 {
                return Err(Error::validation(name, "output file is empty"));
            }
        }
        Ok(())
    }
}
