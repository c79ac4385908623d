//! Service configuration: TOML file with environment overrides
//! (`MOLTRUST_*`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {0}: {1}")]
    Read(PathBuf, std::io::Error),
    #[error("cannot parse config file {0}: {1}")]
    Parse(PathBuf, toml::de::Error),
    #[error("invalid {field}: {detail}")]
    Invalid { field: String, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnchorBackendKind {
    /// Deterministic in-memory backend; reference is the root hex.
    Mock,
    /// Append-only file of anchored roots under the data directory.
    Journal,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegistryConfig {
    pub listen: String,
    pub data_dir: PathBuf,
    pub operator_key_path: PathBuf,
    pub anchor_backend: AnchorBackendKind,
    /// Batch trigger: whichever of size and interval fires first.
    pub batch_max_records: usize,
    pub batch_max_interval_secs: u64,
    /// Snapshot cadence in applied events.
    pub snapshot_every: u64,
    /// Per-IP request budget per minute; 0 disables the limiter. TLS
    /// termination is a deployment concern and is expected upstream.
    pub rate_limit_per_minute: u32,
}

impl Default for RegistryConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8421".to_string(),
            data_dir: PathBuf::from("./moltrust-data"),
            operator_key_path: PathBuf::from("./operator.key"),
            anchor_backend: AnchorBackendKind::Mock,
            batch_max_records: 64,
            batch_max_interval_secs: 600,
            snapshot_every: 256,
            rate_limit_per_minute: 0,
        }
    }
}

impl RegistryConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| ConfigError::Read(path.to_path_buf(), e))?;
                toml::from_str(&text).map_err(|e| ConfigError::Parse(path.to_path_buf(), e))?
            }
            None => Self::default(),
        };
        config.apply_env_overrides()?;
        if config.batch_max_records == 0 {
            return Err(ConfigError::Invalid {
                field: "batch_max_records".into(),
                detail: "must be at least 1".into(),
            });
        }
        Ok(config)
    }

    fn apply_env_overrides(&mut self) -> Result<(), ConfigError> {
        if let Ok(listen) = std::env::var("MOLTRUST_LISTEN") {
            self.listen = listen;
        }
        if let Ok(dir) = std::env::var("MOLTRUST_DATA_DIR") {
            self.data_dir = PathBuf::from(dir);
        }
        if let Ok(path) = std::env::var("MOLTRUST_OPERATOR_KEY") {
            self.operator_key_path = PathBuf::from(path);
        }
        if let Ok(backend) = std::env::var("MOLTRUST_ANCHOR_BACKEND") {
            self.anchor_backend = match backend.as_str() {
                "mock" => AnchorBackendKind::Mock,
                "journal" => AnchorBackendKind::Journal,
                other => {
                    return Err(ConfigError::Invalid {
                        field: "MOLTRUST_ANCHOR_BACKEND".into(),
                        detail: format!("unknown backend {other}"),
                    })
                }
            };
        }
        for (var, target) in [("MOLTRUST_BATCH_MAX_RECORDS", &mut self.batch_max_records)] {
            if let Ok(value) = std::env::var(var) {
                *target = value.parse().map_err(|_| ConfigError::Invalid {
                    field: var.into(),
                    detail: format!("not a number: {value}"),
                })?;
            }
        }
        if let Ok(value) = std::env::var("MOLTRUST_BATCH_MAX_INTERVAL_SECS") {
            self.batch_max_interval_secs = value.parse().map_err(|_| ConfigError::Invalid {
                field: "MOLTRUST_BATCH_MAX_INTERVAL_SECS".into(),
                detail: format!("not a number: {value}"),
            })?;
        }
        if let Ok(value) = std::env::var("MOLTRUST_RATE_LIMIT_PER_MINUTE") {
            self.rate_limit_per_minute = value.parse().map_err(|_| ConfigError::Invalid {
                field: "MOLTRUST_RATE_LIMIT_PER_MINUTE".into(),
                detail: format!("not a number: {value}"),
            })?;
        }
        Ok(())
    }

    pub fn log_path(&self) -> PathBuf {
        self.data_dir.join("events.log")
    }

    pub fn snapshot_path(&self) -> PathBuf {
        self.data_dir.join("snapshot.json")
    }

    pub fn journal_path(&self) -> PathBuf {
        self.data_dir.join("anchors.journal")
    }
}
