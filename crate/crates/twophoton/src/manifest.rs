use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

/// Record of one run, written next to its outputs. Everything except
/// `timestamp_unix` is a function of the inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config: Option<String>,
    pub seed: u64,
    pub out: String,
    pub version: String,
    pub files: Vec<String>,
    pub timestamp_unix: u64,
}

impl Manifest {
    pub fn new(command: &str, config: Option<&Path>, seed: u64, out: &Path, files: Vec<String>) -> Self {
        Manifest {
            command: command.to_string(),
            config: config.map(|p| p.display().to_string()),
            seed,
            out: out.display().to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            files,
            timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        }
    }
}
