//! Service configuration, read from TOML.
//!
//! ```toml
//! listen = "127.0.0.1:8080"
//! bank = "bank.json"          # optional, shipped default bank otherwise
//! journal = "captcha.journal" # optional
//! sweep_interval_secs = 30
//!
//! [rate_limit]
//! issues_per_minute = 30
//! api_key_header = "x-api-key"
//!
//! [lifecycle]
//! time_limit_secs = 600
//! max_attempts_per_challenge = 3
//! signing_secret = "<64 hex characters>"
//! ```
//!
//! `CAPTCHA_LISTEN` and `CAPTCHA_SIGNING_SECRET` override the file.

use std::path::{Path, PathBuf};

use cogcaptcha::lifecycle::{parse_secret, LifecycleConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ENV_LISTEN: &str = "CAPTCHA_LISTEN";
pub const ENV_SIGNING_SECRET: &str = "CAPTCHA_SIGNING_SECRET";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RateLimitConfig {
    /// Challenge issues (including retries) per client key per minute.
    pub issues_per_minute: u32,
    /// Header whose value is appended to the source address to form the
    /// client key.
    pub api_key_header: String,
}

impl Default for RateLimitConfig {
    fn default() -> Self {
        Self {
            issues_per_minute: 30,
            api_key_header: "x-api-key".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub listen: String,
    pub bank: Option<PathBuf>,
    pub journal: Option<PathBuf>,
    pub sweep_interval_secs: u64,
    pub rate_limit: RateLimitConfig,
    pub lifecycle: LifecycleConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            bank: None,
            journal: None,
            sweep_interval_secs: 30,
            rate_limit: RateLimitConfig::default(),
            lifecycle: LifecycleConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: ServiceConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Reads `path`, applies environment overrides and validates.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        let mut config: ServiceConfig = toml::from_str(&text)?;
        config.apply_env(|k| std::env::var(k).ok())?;
        // relative paths resolve against the config file
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.bank, &mut config.journal].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(listen) = var(ENV_LISTEN) {
            self.listen = listen;
        }
        if let Some(secret) = var(ENV_SIGNING_SECRET) {
            self.lifecycle.signing_secret =
                parse_secret(&secret).map_err(|e| ConfigError::Invalid(format!("{ENV_SIGNING_SECRET}: {e}")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.lifecycle.validate().map_err(ConfigError::Invalid)?;
        if self.rate_limit.issues_per_minute == 0 {
            return Err(ConfigError::Invalid("rate_limit.issues_per_minute must be positive".into()));
        }
        if self.sweep_interval_secs == 0 {
            return Err(ConfigError::Invalid("sweep_interval_secs must be positive".into()));
        }
        if self.listen.trim().is_empty() {
            return Err(ConfigError::Invalid("listen address is empty".into()));
        }
        Ok(())
    }
}
