use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emotion::{
    EmotionGrid, UpdateConfig, DEFAULT_SIGMA0, DEFAULT_SIGMA_MAX, DEFAULT_SUPPORT_SIGMAS, DEFAULT_TEMPERATURE, DEFAULT_VALID_THRESHOLD,
};
use crate::grounding::{
    Connectivity, FeatureGrid, GroundingConfig, InstructionParser, LexiconEmbedder, RemoteEmbedder, RemoteInstructionParser,
    ScriptedInstructionParser, TextEmbedder, SCENE_OBJECTS,
};
use crate::llm::{ChatClient, LlmConfig};
use crate::planning::{CostModel, DEFAULT_BASE_STEP_COST, DEFAULT_EMOTION_WEIGHT};
use crate::reflection::{Backends, PromptTemplates, ReflectionConfig, RemoteDescriber, RemoteEvaluator};
use crate::sim::{EpisodeConfig, MapSettings, Stack, DEFAULT_COLLISION_LIMIT, DEFAULT_FRAME_OFFSET};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("backend setup failed: {0}")]
    Backend(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Scripted,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmotionSection {
    pub sigma0: f64,
    pub valid_threshold: f64,
    /// Gaussian support radius in sigmas; `null` sums every Gaussian everywhere.
    pub support_sigmas: Option<f64>,
    pub sigma_max: f64,
    pub temperature: f64,
    pub n_update_cells: usize,
    pub max_update_range: f64,
    pub cone_half_angle_deg: f64,
    /// Literal multiplier without the clamp to 1.
    pub raw_update: bool,
}

impl Default for EmotionSection {
    fn default() -> Self {
        Self {
            sigma0: DEFAULT_SIGMA0,
            valid_threshold: DEFAULT_VALID_THRESHOLD,
            support_sigmas: Some(DEFAULT_SUPPORT_SIGMAS),
            sigma_max: DEFAULT_SIGMA_MAX,
            temperature: DEFAULT_TEMPERATURE,
            n_update_cells: 5,
            max_update_range: 6.0,
            cone_half_angle_deg: 45.0,
            raw_update: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanningSection {
    pub emotion_weight: f64,
    pub base_step_cost: f64,
}

impl Default for PlanningSection {
    fn default() -> Self {
        Self { emotion_weight: DEFAULT_EMOTION_WEIGHT, base_step_cost: DEFAULT_BASE_STEP_COST }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroundingSection {
    pub min_cells: usize,
    pub min_avg_sim: f64,
    pub connectivity: Connectivity,
}

impl Default for GroundingSection {
    fn default() -> Self {
        let g = GroundingConfig::default();
        Self { min_cells: g.min_cells, min_avg_sim: g.min_avg_sim, connectivity: g.connectivity }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodeSection {
    pub frame_offset: u32,
    pub collision_limit: u32,
    pub latency_jitter: u32,
}

impl Default for EpisodeSection {
    fn default() -> Self {
        Self { frame_offset: DEFAULT_FRAME_OFFSET, collision_limit: DEFAULT_COLLISION_LIMIT, latency_jitter: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackendSection {
    pub parser: BackendKind,
    pub embedder: BackendKind,
    pub describer: BackendKind,
    pub evaluator: BackendKind,
    /// Embedding endpoint for the remote embedder.
    pub embedding_url: Option<String>,
    pub timeout_secs: f64,
    pub retries: u32,
}

impl Default for BackendSection {
    fn default() -> Self {
        Self {
            parser: BackendKind::Scripted,
            embedder: BackendKind::Scripted,
            describer: BackendKind::Scripted,
            evaluator: BackendKind::Scripted,
            embedding_url: None,
            timeout_secs: 30.0,
            retries: 1,
        }
    }
}

/// Every tunable of a run. Missing keys take their defaults; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub emotion: EmotionSection,
    pub planning: PlanningSection,
    pub grounding: GroundingSection,
    pub episode: EpisodeSection,
    pub backends: BackendSection,
    /// Overrides the scenario seed when set.
    pub seed: Option<u64>,
}

fn positive(name: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: Self = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let e = &self.emotion;
        positive("emotion.sigma0", e.sigma0)?;
        let peak = 1.0 / (2.0 * std::f64::consts::PI * e.sigma0 * e.sigma0);
        if !(e.valid_threshold >= 0.0 && e.valid_threshold <= peak) {
            return Err(ConfigError::Invalid(format!("emotion.valid_threshold must lie in [0, {peak}], got {}", e.valid_threshold)));
        }
        if let Some(s) = e.support_sigmas {
            positive("emotion.support_sigmas", s)?;
        }
        positive("emotion.sigma_max", e.sigma_max)?;
        if e.sigma_max < e.sigma0 {
            return Err(ConfigError::Invalid("emotion.sigma_max must be at least emotion.sigma0".into()));
        }
        if !(e.cone_half_angle_deg > 0.0 && e.cone_half_angle_deg <= 180.0) {
            return Err(ConfigError::Invalid(format!("emotion.cone_half_angle_deg must lie in (0, 180], got {}", e.cone_half_angle_deg)));
        }
        self.update_config().validate().map_err(|err| ConfigError::Invalid(err.to_string()))?;
        self.cost_model().validate().map_err(|err| ConfigError::Invalid(err.to_string()))?;
        let g = &self.grounding;
        if g.min_cells == 0 {
            return Err(ConfigError::Invalid("grounding.min_cells must be at least 1".into()));
        }
        if !g.min_avg_sim.is_finite() {
            return Err(ConfigError::Invalid("grounding.min_avg_sim must be finite".into()));
        }
        let ep = &self.episode;
        if ep.frame_offset == 0 {
            return Err(ConfigError::Invalid("episode.frame_offset must be at least 1".into()));
        }
        if ep.collision_limit == 0 {
            return Err(ConfigError::Invalid("episode.collision_limit must be at least 1".into()));
        }
        positive("backends.timeout_secs", self.backends.timeout_secs)?;
        Ok(())
    }

    pub fn update_config(&self) -> UpdateConfig {
        let e = &self.emotion;
        UpdateConfig {
            temperature: e.temperature,
            n_update_cells: e.n_update_cells,
            max_update_range: e.max_update_range,
            cone_half_angle: e.cone_half_angle_deg.to_radians(),
            sigma_max: e.sigma_max,
            raw_multiplier: e.raw_update,
        }
    }

    pub fn cost_model(&self) -> CostModel {
        CostModel { emotion_weight: self.planning.emotion_weight, base_step_cost: self.planning.base_step_cost }
    }

    pub fn map_settings(&self) -> MapSettings {
        MapSettings { sigma0: self.emotion.sigma0, valid_threshold: self.emotion.valid_threshold, support_sigmas: self.emotion.support_sigmas }
    }

    pub fn episode_config(&self, updates_enabled: bool) -> EpisodeConfig {
        let remote_describer = self.backends.describer == BackendKind::Remote;
        EpisodeConfig {
            cost: self.cost_model(),
            reflection: ReflectionConfig { update: self.update_config(), sigma0: self.emotion.sigma0 },
            grounding: GroundingConfig {
                min_cells: self.grounding.min_cells,
                min_avg_sim: self.grounding.min_avg_sim,
                connectivity: self.grounding.connectivity,
            },
            frame_offset: self.episode.frame_offset,
            collision_limit: self.episode.collision_limit,
            latency_jitter: self.episode.latency_jitter,
            updates_enabled,
            raster_frames: remote_describer,
        }
    }

    fn chat_client(&self) -> Result<ChatClient, ConfigError> {
        let mut llm = LlmConfig::from_env(Duration::from_secs_f64(self.backends.timeout_secs)).map_err(|e| ConfigError::Backend(e.to_string()))?;
        llm.retries = self.backends.retries;
        Ok(ChatClient::new(llm))
    }

    /// Assembles the stack around loaded map layers. Remote stages read the
    /// endpoint from the environment and fall back to scripted ones on failure.
    pub fn build_stack(&self, emotion: EmotionGrid, features: FeatureGrid) -> Result<Stack, ConfigError> {
        let b = &self.backends;
        let embedder: Box<dyn TextEmbedder> = match b.embedder {
            BackendKind::Scripted => Box::new(LexiconEmbedder::bundled()),
            BackendKind::Remote => {
                let url = b.embedding_url.clone().ok_or_else(|| ConfigError::Backend("backends.embedding_url is required for the remote embedder".into()))?;
                Box::new(RemoteEmbedder::new(url, features.dim(), Duration::from_secs_f64(b.timeout_secs)))
            }
        };
        let parser: Box<dyn InstructionParser> = match b.parser {
            BackendKind::Scripted => Box::new(ScriptedInstructionParser::default()),
            BackendKind::Remote => Box::new(RemoteInstructionParser::new(
                self.chat_client()?,
                PromptTemplates::default(),
                SCENE_OBJECTS.iter().map(|s| s.to_string()).collect(),
            )),
        };
        let backends = if b.describer == BackendKind::Scripted && b.evaluator == BackendKind::Scripted {
            Backends::scripted()
        } else {
            let scripted = Backends::scripted();
            let describer: Box<dyn crate::reflection::EventDescriber> = match b.describer {
                BackendKind::Scripted => scripted.describer,
                BackendKind::Remote => Box::new(RemoteDescriber::new(self.chat_client()?)),
            };
            let evaluator: Box<dyn crate::reflection::EmotionEvaluator> = match b.evaluator {
                BackendKind::Scripted => scripted.evaluator,
                BackendKind::Remote => Box::new(RemoteEvaluator::new(self.chat_client()?)),
            };
            Backends::with_fallback(describer, evaluator, PromptTemplates::default())
        };
        Ok(Stack { emotion, features, embedder, parser, backends })
    }
}
