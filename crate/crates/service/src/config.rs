//! Service configuration loaded from a TOML file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use skillforge::diagnosis::DiagnosisConfig;
use skillforge::playing::PlayConfig;
use skillforge::world::DEFAULT_NOISE_SIGMA;

use crate::ServiceError;

/// Environment variable naming the configuration file.
pub const CONFIG_ENV: &str = "SKILLFORGE_CONFIG";

/// Store path that selects an in-memory database.
pub const IN_MEMORY_STORE: &str = ":memory:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub port: u16,
    /// SQLite file holding the experience memory, or `:memory:`.
    pub store: String,
    /// Scenario catalog replacing the bundled one.
    pub catalog: Option<PathBuf>,
    /// Standard deviation of the simulated sensor noise.
    pub noise: f64,
    /// Fault-free executions per diagnostic skill used to train the test models.
    pub training_runs: usize,
    pub training_seed: u64,
    pub playing: PlayConfig,
    pub diagnosis: DiagnosisConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            port: 8080,
            store: "skillforge.db".into(),
            catalog: None,
            noise: DEFAULT_NOISE_SIGMA,
            training_runs: 30,
            training_seed: 0,
            playing: PlayConfig::default(),
            diagnosis: DiagnosisConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ServiceError> {
        let config: ServiceConfig = toml::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn read(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Loads the file named by [`CONFIG_ENV`] if set, else `path` if given,
    /// else the defaults.
    pub fn load(path: Option<&Path>) -> Result<Self, ServiceError> {
        match std::env::var_os(CONFIG_ENV) {
            Some(env) => Self::read(Path::new(&env)),
            None => match path {
                Some(p) => Self::read(p),
                None => Ok(Self::default()),
            },
        }
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(ServiceError::Config(format!("noise must be a finite non-negative number, got {}", self.noise)));
        }
        if self.training_runs < 2 {
            return Err(ServiceError::Config("training_runs must be at least 2".into()));
        }
        self.playing.validate().map_err(|e| ServiceError::Config(e.to_string()))?;
        self.diagnosis.validate().map_err(|e| ServiceError::Config(e.to_string()))?;
        Ok(())
    }
}
