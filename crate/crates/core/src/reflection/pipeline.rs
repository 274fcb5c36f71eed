use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::describe::{EventDescriber, ScriptedDescriber};
use super::evaluate::{EmotionEvaluator, PositiveScore, ScriptedEvaluator};
use super::frames::{EntityKind, Frame};
use super::select::select_update_cells;
use super::{EmotionScore, PromptTemplates, ReflectionError};
use crate::emotion::{EmotionGrid, UpdateConfig, DEFAULT_SIGMA0};
use crate::geometry::{Cell, Heading};

/// Simulator-provided facts about what the agent ran into.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityHint {
    pub kind: EntityKind,
    /// The cell the agent tried to enter.
    pub contact_cell: Cell,
}

/// Everything reflection needs about one event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t_evt: u32,
    pub agent: Cell,
    pub heading: Heading,
    pub frames: [Frame; 3],
    pub entity_hint: Option<EntityHint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectionConfig {
    pub update: UpdateConfig,
    /// Sigma given to cells added to the map during reflection.
    pub sigma0: f64,
}

impl Default for ReflectionConfig {
    fn default() -> Self {
        Self { update: UpdateConfig::default(), sigma0: DEFAULT_SIGMA0 }
    }
}

/// The language stages plus their prompts.
pub struct Backends {
    pub describer: Box<dyn EventDescriber>,
    pub evaluator: Box<dyn EmotionEvaluator>,
    pub templates: PromptTemplates,
}

impl Backends {
    pub fn scripted() -> Self {
        Self {
            describer: Box::new(ScriptedDescriber),
            evaluator: Box::new(ScriptedEvaluator),
            templates: PromptTemplates::default(),
        }
    }

    /// Wraps remote stages so that any failure falls back to the scripted ones.
    pub fn with_fallback(describer: Box<dyn EventDescriber>, evaluator: Box<dyn EmotionEvaluator>, templates: PromptTemplates) -> Self {
        Self {
            describer: Box::new(FallbackDescriber { primary: describer }),
            evaluator: Box::new(FallbackEvaluator { primary: evaluator }),
            templates,
        }
    }
}

struct FallbackDescriber {
    primary: Box<dyn EventDescriber>,
}

impl EventDescriber for FallbackDescriber {
    fn describe(&self, frames: &[Frame; 3], templates: &PromptTemplates) -> Result<String, ReflectionError> {
        match self.primary.describe(frames, templates) {
            Ok(text) => Ok(text),
            Err(e @ (ReflectionError::BackendUnavailable(_) | ReflectionError::MalformedResponse(_))) => {
                log::warn!("event descriptor failed ({e}); using the scripted descriptor");
                ScriptedDescriber.describe(frames, templates)
            }
            Err(e) => Err(e),
        }
    }
}

struct FallbackEvaluator {
    primary: Box<dyn EmotionEvaluator>,
}

impl EmotionEvaluator for FallbackEvaluator {
    fn evaluate(&self, description: &str, templates: &PromptTemplates) -> Result<EmotionScore, ReflectionError> {
        match self.primary.evaluate(description, templates) {
            Ok(s) => Ok(s),
            Err(e @ (ReflectionError::BackendUnavailable(_) | ReflectionError::MalformedResponse(_))) => {
                log::warn!("emotion evaluator failed ({e}); using the scripted evaluator");
                ScriptedEvaluator.evaluate(description, templates)
            }
            Err(e) => Err(e),
        }
    }

    fn evaluate_positive(&self, description: &str, templates: &PromptTemplates) -> Result<PositiveScore, ReflectionError> {
        self.primary
            .evaluate_positive(description, templates)
            .or_else(|_| ScriptedEvaluator.evaluate_positive(description, templates))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionOutcome {
    pub description: String,
    pub score: EmotionScore,
    /// Cells whose Gaussians were widened.
    pub updated_cells: Vec<Cell>,
    /// Cells newly inserted into the occupied set.
    pub added_cells: Vec<Cell>,
    /// The map changed and the planner must replan.
    pub replan: bool,
}

/// Describes and scores the event, then applies the one-shot update.
///
/// A zero score leaves the grid untouched. When the agent hit an unmapped
/// static entity, or when nothing mapped lies in the sensing cone, the
/// contact cell is added to the map before the update.
pub fn reflect_and_update(
    event: &EventRecord,
    grid: &mut EmotionGrid,
    backends: &Backends,
    config: &ReflectionConfig,
) -> Result<ReflectionOutcome, ReflectionError> {
    let description = backends.describer.describe(&event.frames, &backends.templates)?;
    if description.trim().is_empty() {
        return Err(ReflectionError::EmptyDescription);
    }
    let score = backends.evaluator.evaluate(&description, &backends.templates)?;
    let mut outcome = ReflectionOutcome {
        description,
        score,
        updated_cells: Vec::new(),
        added_cells: Vec::new(),
        replan: false,
    };
    if outcome.score.total() == 0 {
        return Ok(outcome);
    }

    let contact = event.entity_hint.as_ref().map(|h| (h.kind, h.contact_cell));
    if let Some((kind, cell)) = contact {
        if kind.is_static() && !grid.is_occupied(cell) {
            outcome.added_cells = grid.add_occupied_cells(&BTreeSet::from([cell]), config.sigma0)?;
        }
    }
    let mut targets = select_update_cells(&grid.occupancy(), event.agent, event.heading, &config.update);
    if targets.is_empty() {
        if let Some((_, cell)) = contact {
            let added = grid.add_occupied_cells(&BTreeSet::from([cell]), config.sigma0)?;
            outcome.added_cells.extend(added);
            targets.push(cell);
        }
    }
    if targets.is_empty() {
        log::info!("no map cells associated with the event at {}", event.agent);
        return Ok(outcome);
    }
    let target_set: BTreeSet<Cell> = targets.iter().copied().collect();
    grid.apply_update(&target_set, event.heading, &outcome.score, &config.update)?;
    outcome.updated_cells = targets;
    outcome.replan = true;
    Ok(outcome)
}
