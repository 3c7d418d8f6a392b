//! Optional JSON config file mirroring the CLI flags: any flag left off the
//! command line falls back to the matching config key.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub recorder_endpoint: Option<String>,
    pub quarantine: Option<PathBuf>,
    pub listen: Option<String>,
    pub upstream: Option<String>,
    pub schema: Option<PathBuf>,
    pub extractor_path: Option<PathBuf>,
    pub parse_timeout_ms: Option<u64>,
    pub policy: Option<PathBuf>,
    pub default: Option<String>,
    pub workers: Option<usize>,
    pub db_endpoint: Option<String>,
    pub guard_endpoint: Option<String>,
    pub stub_config: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

impl CliConfig {
    pub fn load(path: Option<&Path>) -> Result<CliConfig> {
        match path {
            None => Ok(CliConfig::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))
            }
        }
    }
}

/// Flag value if given, else the config fallback, else an error naming the
/// flag.
pub fn require<T: Clone>(flag: Option<T>, fallback: Option<T>, name: &str) -> Result<T> {
    flag.or(fallback)
        .with_context(|| format!("missing --{name} (no config fallback either)"))
}
