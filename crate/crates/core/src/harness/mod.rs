//! Map persistence and run configuration.

mod archive;
mod config;

pub use archive::{ArchiveError, ArchiveHeader, MapArchive, FORMAT_VERSION, MAGIC};
pub use config::{BackendKind, BackendSection, ConfigError, EmotionSection, EpisodeSection, GroundingSection, PlanningSection, RunConfig};
