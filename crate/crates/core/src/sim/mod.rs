//! Grid world with dynamic entities, the episode runner and the benchmark suite.

mod episode;
mod render;
mod scenario;
mod suite;
mod world;

pub use episode::{
    build_map, run_episode, EpisodeConfig, EpisodeResult, MapSettings, ReflectionSummary, Stack, Termination, DEFAULT_COLLISION_LIMIT,
    DEFAULT_FRAME_OFFSET,
};
pub use render::{heat, render_topdown, RenderOptions, REFERENCE_EMOTION};
pub use scenario::{
    decode_row, encode_row, EntityKindSpec, EntitySpec, FeatureRegion, GeometrySpec, ScenarioSpec, SuiteEntry, SuiteSpec, DEFAULT_LATENCY,
    DEFAULT_TRIGGER_RADIUS,
};
pub use suite::{run_scenario, run_suite, SuiteReport, SuiteRow, ABLATION_SUFFIX};
pub use world::{step, AgentState, Collision, Command, Entity, EntityState, StepOutcome, World};

use thiserror::Error;

use crate::emotion::EmotionError;
use crate::error::GeometryError;
use crate::grounding::GroundingError;
use crate::planning::PlanError;
use crate::reflection::ReflectionError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error("output error: {0}")]
    Output(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Emotion(#[from] EmotionError),
    #[error(transparent)]
    Grounding(#[from] GroundingError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Reflection(#[from] ReflectionError),
}
