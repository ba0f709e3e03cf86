//! Toolkit settings: defaults, an optional JSON file, then command-line flags.

use dlaperf::cachemodel::SmoothingParams;
use dlaperf::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolkitConfig {
    /// Built-in machine name or path to a machine JSON file.
    pub machine: String,
    /// `reference`, a synthetic backend name or a shared-library path.
    pub backend: String,
    pub threads: u32,
    pub models_dir: PathBuf,
    pub seed: u64,
    pub smoothing: SmoothingParams,
    /// Doubles per cache line.
    pub line_doubles: usize,
}

impl Default for ToolkitConfig {
    fn default() -> Self {
        ToolkitConfig {
            machine: "sandybridge-e5-2670".into(),
            backend: "reference".into(),
            threads: 1,
            models_dir: PathBuf::from("models"),
            seed: 0,
            smoothing: SmoothingParams::default(),
            line_doubles: 8,
        }
    }
}

impl ToolkitConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ToolkitConfig = serde_json::from_str(&text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.threads < 1 {
            return Err(Error::Config("thread count must be at least 1".into()));
        }
        if self.line_doubles < 1 {
            return Err(Error::Config("cache line must hold at least one double".into()));
        }
        self.smoothing.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg: ToolkitConfig = serde_json::from_str(r#"{"threads": 4, "seed": 7}"#).unwrap();
        assert_eq!(cfg.threads, 4);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.backend, "reference");
        cfg.validate().unwrap();
    }

    #[test]
    fn invalid_settings_are_rejected() {
        let cfg = ToolkitConfig {
            threads: 0,
            ..ToolkitConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(serde_json::from_str::<ToolkitConfig>(r#"{"thread": 2}"#).is_err());
    }
}
