//! Language grounding: object masks from embedding similarity, cluster
//! filtering, the six goal-selection calls and instruction parsing.

mod embed;
mod goals;
mod ground;
mod instruction;

pub use embed::{Embedding, LexiconEmbedder, RemoteEmbedder, TextEmbedder};
pub use goals::{resolve_goal, GoalApi, GoalCall, GoalProgram, Grounder, GroundingConfig, FREE_CELL_SEARCH_RADIUS, NEUTRAL_LABEL};
pub use ground::{cluster_mask, ground_object, reject_outliers, select_best_cluster, ClusterStats, Connectivity, FeatureGrid, GroundingResult};
pub use instruction::{InstructionParser, RemoteInstructionParser, ScriptedInstructionParser, SCENE_OBJECTS};

use thiserror::Error;

use crate::geometry::Cell;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GroundingError {
    #[error("embedding for {0:?} has non-finite or zero entries")]
    NonFinite(String),
    #[error("lexicon is empty")]
    EmptyLexicon,
    #[error("lexicon error: {0}")]
    Lexicon(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("unknown token {0:?}")]
    UnknownToken(String),
    #[error("bad embedder response: {0}")]
    BadResponse(String),
    #[error("embedding backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("cell {0} is outside the grid")]
    OutOfBounds(Cell),
    #[error("no cluster for object {0:?} survives outlier rejection")]
    ObjectNotFound(String),
    #[error("no free cell within {radius} cells of {near}")]
    NoFreeCellNearGoal { near: Cell, radius: i32 },
    #[error("cannot parse instruction {0:?}")]
    UnparsableInstruction(String),
    #[error("invalid goal program: {0}")]
    InvalidProgram(String),
}
