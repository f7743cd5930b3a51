//! Run manifests: everything needed to reproduce a step and check the result.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::{CliError, RunConfig, Step};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub command: Step,
    pub version: String,
    pub seed: u64,
    /// Fully resolved configuration (absolute paths).
    pub config: RunConfig,
    /// Input path -> sha256.
    pub inputs: BTreeMap<String, String>,
    /// Output file name -> sha256.
    pub outputs: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

impl Manifest {
    pub fn new(
        command: Step,
        config: RunConfig,
        inputs: BTreeMap<String, String>,
        outputs: BTreeMap<String, String>,
        warnings: Vec<String>,
    ) -> Self {
        Manifest { command, version: env!("CARGO_PKG_VERSION").to_string(), seed: config.seed, config, inputs, outputs, warnings }
    }

    pub fn file_name(step: Step) -> String {
        format!("manifest-{}.json", step.name())
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn hash_files(paths: &[PathBuf]) -> Result<BTreeMap<String, String>, CliError> {
    paths.iter().map(|p| Ok((p.display().to_string(), sha256_file(p)?))).collect()
}

pub fn hash_outputs(dir: &Path, names: &[String]) -> Result<BTreeMap<String, String>, CliError> {
    names.iter().map(|n| Ok((n.clone(), sha256_file(&dir.join(n))?))).collect()
}
