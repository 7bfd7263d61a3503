use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, BackendSpec, ChatParams};
use crate::domain::{IntentCatalog, OccupationSector, StrategyCard};
use crate::persona::{SamplingPlan, DEFAULT_PERSONA_TEMPERATURE, DEFAULT_RETRIES};

use super::{DEFAULT_CONVERSATIONS_PER_PERSONA, DEFAULT_MAX_TURNS, DEFAULT_PARALLELISM};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("no strategy card configured for sector {0}")]
    MissingStrategy(OccupationSector),
    #[error("cannot read config {path}: {error}")]
    Io {
        path: PathBuf,
        error: std::io::Error,
    },
    #[error("cannot parse config {path}: {error}")]
    Parse {
        path: PathBuf,
        error: serde_json::Error,
    },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Agent pipeline shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PipelineMode {
    /// One model emits thought and response together.
    Monolithic,
    /// A planner emits the thought; a responder writes the reply.
    PlannerResponder {
        #[serde(default)]
        strategy_enabled: bool,
    },
}

impl Default for PipelineMode {
    fn default() -> Self {
        PipelineMode::PlannerResponder { strategy_enabled: false }
    }
}

/// Backend plus decoding parameters for one role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleConfig {
    pub backend: BackendSpec,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<Vec<String>>,
}

impl RoleConfig {
    pub fn params(&self, default_temperature: f64) -> ChatParams {
        let mut p = ChatParams::new(&self.model)
            .with_temperature(self.temperature.unwrap_or(default_temperature));
        if let Some(m) = self.max_tokens {
            p.max_tokens = m;
        }
        p.stop = self.stop.clone();
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleConfigs {
    pub user: RoleConfig,
    pub planner: RoleConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub responder: Option<RoleConfig>,
    /// Persona generator; defaults to the user role's backend and model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persona: Option<RoleConfig>,
}

impl RoleConfigs {
    pub fn persona_role(&self) -> &RoleConfig {
        self.persona.as_ref().unwrap_or(&self.user)
    }

    pub fn persona_params(&self) -> ChatParams {
        self.persona_role().params(DEFAULT_PERSONA_TEMPERATURE)
    }

    fn all_mut(&mut self) -> impl Iterator<Item = &mut RoleConfig> {
        [Some(&mut self.user), Some(&mut self.planner), self.responder.as_mut(), self.persona.as_mut()]
            .into_iter()
            .flatten()
    }
}

/// Full run description, as read from the config file and echoed into
/// `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub sampling: SamplingPlan,
    #[serde(default = "default_conversations")]
    pub conversations_per_persona: u32,
    #[serde(default = "default_max_turns")]
    pub max_turns: u32,
    #[serde(default)]
    pub pipeline: PipelineMode,
    pub roles: RoleConfigs,
    #[serde(default)]
    pub intents: IntentCatalog,
    #[serde(default = "StrategyCard::defaults")]
    pub strategies: Vec<StrategyCard>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Fraction of aborted conversations above which `simulate` fails.
    #[serde(default = "default_abort_threshold")]
    pub abort_threshold: f64,
    #[serde(default = "default_retries")]
    pub persona_retries: u32,
    /// Adds wall-clock timestamps to transcripts. Off by default so that
    /// transcripts are byte-reproducible.
    #[serde(default)]
    pub record_timestamps: bool,
}

fn default_conversations() -> u32 {
    DEFAULT_CONVERSATIONS_PER_PERSONA
}

fn default_max_turns() -> u32 {
    DEFAULT_MAX_TURNS
}

fn default_parallelism() -> usize {
    DEFAULT_PARALLELISM
}

fn default_abort_threshold() -> f64 {
    0.10
}

fn default_retries() -> u32 {
    DEFAULT_RETRIES
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|error| ConfigError::Io {
            path: path.to_path_buf(),
            error,
        })?;
        let config: RunConfig = serde_json::from_str(&text).map_err(|error| ConfigError::Parse {
            path: path.to_path_buf(),
            error,
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.conversations_per_persona < 1 {
            return Err(ConfigError::Invalid("conversations_per_persona must be >= 1".into()));
        }
        if self.max_turns < 1 {
            return Err(ConfigError::Invalid("max_turns must be >= 1".into()));
        }
        if self.parallelism < 1 {
            return Err(ConfigError::Invalid("parallelism must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.abort_threshold) {
            return Err(ConfigError::Invalid("abort_threshold must lie in [0, 1]".into()));
        }
        self.sampling
            .fixed_values()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if matches!(self.pipeline, PipelineMode::PlannerResponder { .. }) && self.roles.responder.is_none() {
            return Err(ConfigError::Invalid(
                "planner_responder pipeline requires roles.responder".into(),
            ));
        }
        if let PipelineMode::PlannerResponder { strategy_enabled: true } = self.pipeline {
            for sector in OccupationSector::ALL {
                if !self.strategies.iter().any(|c| c.sector == sector) {
                    return Err(ConfigError::MissingStrategy(sector));
                }
            }
        }
        let mut roles = vec![&self.roles.user, &self.roles.planner];
        roles.extend(self.roles.responder.as_ref());
        roles.extend(self.roles.persona.as_ref());
        for role in roles {
            role.backend.validate()?;
            role.params(0.7).validate()?;
        }
        Ok(())
    }

    /// Wraps every role backend in a strict replay layer.
    pub fn make_strict(&mut self, default_cache: &Path) {
        for role in self.roles.all_mut() {
            let spec = role.backend.clone();
            role.backend = spec.into_strict(default_cache);
        }
    }

    pub fn set_endpoint(&mut self, url: &str) {
        for role in self.roles.all_mut() {
            role.backend.set_endpoint(url);
        }
    }
}
