use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::config::ExperimentSpec;
use crate::error::{EbmError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to repeat a run and check its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// The resolved spec, command-line overrides applied.
    pub spec: ExperimentSpec,
    /// Rates derived from the parameters, for reference.
    pub derived: BTreeMap<String, f64>,
    pub seed: u64,
    /// Seconds since the Unix epoch at start.
    pub started_at: u64,
    pub wall_clock_seconds: f64,
    pub summary: Value,
    /// Output file name to SHA-256 hex digest.
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| EbmError::Config(format!("cannot read manifest {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| EbmError::Config(format!("{}: {e}", path.display())))
    }

    /// Output files in `dir` whose digest differs from the recorded one.
    pub fn mismatches(&self, dir: &Path) -> Vec<String> {
        self.outputs
            .iter()
            .filter(|(name, digest)| file_digest(&dir.join(name)).ok().as_ref() != Some(*digest))
            .map(|(name, _)| name.clone())
            .collect()
    }
}

pub fn file_digest(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}
