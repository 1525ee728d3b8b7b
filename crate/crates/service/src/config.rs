//! Service configuration, read from a TOML file.

use std::path::{Path, PathBuf};
use std::time::Duration;

use asknearby_core::EngineConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AppConfig {
    /// Snapshot directory: `items.jsonl`, `manifest.json` and the optional
    /// resource files (`gazetteer.json`, `relations.json`, `lexicon.json`,
    /// `visits.jsonl`, `users.jsonl`).
    pub data_dir: PathBuf,
    pub bind: String,
    pub engine: EngineConfig,
    pub clients: ClientConfig,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            data_dir: PathBuf::from("data"),
            bind: "127.0.0.1:8080".into(),
            engine: EngineConfig::default(),
            clients: ClientConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClientConfig {
    pub geocoder_endpoint: Option<String>,
    pub llm_endpoint: Option<String>,
    pub timeout_ms: u64,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig { geocoder_endpoint: None, llm_endpoint: None, timeout_ms: 10_000 }
    }
}

impl ClientConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }
}

impl AppConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let cfg: AppConfig = toml::from_str(text).map_err(|e| ConfigError::Parse { path: path.into(), reason: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_toml(&text, path)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.engine.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.bind.parse::<std::net::SocketAddr>().map_err(|e| ConfigError::Invalid(format!("bind {:?}: {e}", self.bind)))?;
        if self.clients.timeout_ms == 0 {
            return Err(ConfigError::Invalid("clients.timeout_ms must be > 0".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the engine settings, recorded in snapshot manifests.
    pub fn engine_hash(&self) -> String {
        let json = serde_json::to_vec(&self.engine).expect("engine config serializes");
        format!("{:x}", Sha256::digest(json))
    }
}
