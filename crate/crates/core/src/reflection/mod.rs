//! Self-reflection: turning an experienced event into an emotion score and a
//! one-shot update of the emotion layer.
//!
//! The pipeline is `capture_frames -> describe -> evaluate -> select cells ->
//! update`. Each language stage sits behind a trait with a deterministic
//! scripted implementation and an optional remote one.

mod describe;
mod evaluate;
mod frames;
mod pipeline;
mod prompts;
mod select;

pub use describe::{EventDescriber, RemoteDescriber, ScriptedDescriber};
pub use evaluate::{
    parse_positive_response, parse_score_response, EmotionEvaluator, PositiveScore, RemoteEvaluator, ScriptedEvaluator,
};
pub use frames::{capture_frames, CapturedFrames, EntityKind, Frame, FramePayload, Observation, RasterImage, SceneDescription};
pub use pipeline::{reflect_and_update, Backends, EntityHint, EventRecord, ReflectionConfig, ReflectionOutcome};
pub use prompts::PromptTemplates;
pub use select::select_update_cells;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emotion::EmotionError;
use crate::llm::LlmError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReflectionError {
    #[error("observation history does not cover timestep {missing}")]
    InsufficientHistory { missing: i64 },
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("event description is empty")]
    EmptyDescription,
    #[error("malformed evaluator response: {0}")]
    MalformedResponse(String),
    #[error("score {0} is outside 0..=3")]
    ScoreOutOfRange(u8),
    #[error("prompt template error: {0}")]
    Template(String),
    #[error(transparent)]
    Emotion(#[from] EmotionError),
}

impl From<LlmError> for ReflectionError {
    fn from(e: LlmError) -> Self {
        match e {
            LlmError::BadResponse(m) => ReflectionError::MalformedResponse(m),
            other => ReflectionError::BackendUnavailable(other.to_string()),
        }
    }
}

/// Two 0..=3 criteria whose sum drives the update.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmotionScore {
    upsetness: u8,
    guiltiness: u8,
    pub rationale: String,
}

impl EmotionScore {
    pub const MAX_PER_CRITERION: u8 = 3;

    pub fn new(upsetness: u8, guiltiness: u8, rationale: impl Into<String>) -> Result<Self, ReflectionError> {
        for v in [upsetness, guiltiness] {
            if v > Self::MAX_PER_CRITERION {
                return Err(ReflectionError::ScoreOutOfRange(v));
            }
        }
        Ok(Self { upsetness, guiltiness, rationale: rationale.into() })
    }

    pub fn upsetness(&self) -> u8 {
        self.upsetness
    }

    pub fn guiltiness(&self) -> u8 {
        self.guiltiness
    }

    pub fn total(&self) -> u8 {
        self.upsetness + self.guiltiness
    }
}
