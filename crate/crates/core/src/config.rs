//! Run parameters shared by the command-line front end, loadable from JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::softhist::{HistConfig, Kernel};
use crate::tiler::{DEFAULT_EPSILON, DEFAULT_PATCH, DEFAULT_STRIDE};

pub const THREADS_ENV: &str = "TILEGRAFT_THREADS";

/// Every field is optional in the JSON file; missing fields take the
/// defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub patch_size: usize,
    pub stride: usize,
    pub mask_floor: f64,
    pub kernel: Kernel,
    pub bins: usize,
    pub tau: f64,
    pub operator: String,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let hist = HistConfig::default();
        Self {
            patch_size: DEFAULT_PATCH,
            stride: DEFAULT_STRIDE,
            mask_floor: DEFAULT_EPSILON,
            kernel: hist.kernel,
            bins: hist.bins,
            tau: hist.tau,
            operator: "identity".into(),
            input: None,
            output: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Malformed(format!("run config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn hist(&self) -> Result<HistConfig> {
        let cfg = HistConfig {
            bins: self.bins,
            tau: self.tau,
            kernel: self.kernel,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses a thread-count setting; 0 means automatic.
pub fn parse_threads(value: &str) -> Result<usize> {
    value.trim().parse::<usize>().map_err(|_| {
        Error::InvalidArgument(format!(
            "{THREADS_ENV} must be a non-negative integer, got {value:?}"
        ))
    })
}
