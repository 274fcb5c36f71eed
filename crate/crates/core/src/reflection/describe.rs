use base64::Engine;

use super::frames::{EntityKind, Frame, FramePayload, SceneDescription};
use super::{PromptTemplates, ReflectionError};
use crate::llm::{ChatClient, ChatMessage};

/// Turns the three event frames into a natural-language description.
pub trait EventDescriber {
    fn describe(&self, frames: &[Frame; 3], templates: &PromptTemplates) -> Result<String, ReflectionError>;
}

/// Deterministic template renderer over structured frames.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScriptedDescriber;

const NEAR_MISS_CELLS: f64 = 2.0;

fn direction(bearing: Option<f64>) -> &'static str {
    match bearing {
        Some(b) if b.abs() < 0.4 => "ahead",
        Some(b) if b > 0.0 => "to the right",
        Some(_) => "to the left",
        None => "nearby",
    }
}

fn collision_clause(kind: EntityKind) -> &'static str {
    match kind {
        EntityKind::HiddenHuman => " who suddenly stepped out from behind the wall",
        EntityKind::DynamicDoor => " that swung open in front of it",
        EntityKind::DangerSign => " standing in its path",
        EntityKind::Obstacle => "",
    }
}

fn scene_line(s: &SceneDescription) -> String {
    let entity = s.entity.unwrap_or(EntityKind::Obstacle);
    if s.collision {
        return format!("the robot collided with {}{}", entity.phrase(), collision_clause(entity));
    }
    match (s.entity, s.distance) {
        (Some(kind), Some(d)) => format!("{} was about {:.0} cells away {}", kind.phrase(), d, direction(s.bearing)),
        _ => "the way ahead of the robot was clear".to_string(),
    }
}

impl ScriptedDescriber {
    pub fn describe_scenes(&self, scenes: [&SceneDescription; 3]) -> String {
        let [before, at, after] = scenes;
        let overall = if at.collision {
            let entity = at.entity.unwrap_or(EntityKind::Obstacle);
            format!(
                "the robot collided with {}{} while moving along its path and had to stop",
                entity.phrase(),
                collision_clause(entity)
            )
        } else if let Some(kind) = [at, before, after]
            .iter()
            .find(|s| s.entity.is_some() && s.distance.is_some_and(|d| d <= NEAR_MISS_CELLS))
            .and_then(|s| s.entity)
        {
            format!("the robot came close to {} but did not touch it", kind.phrase())
        } else {
            "the robot moved through open space without incident".to_string()
        };
        format!(
            "Scene 1: {}. Scene 2: {}. Scene 3: {}. Overall, {}.",
            scene_line(before),
            scene_line(at),
            scene_line(after),
            overall
        )
    }
}

impl EventDescriber for ScriptedDescriber {
    fn describe(&self, frames: &[Frame; 3], _templates: &PromptTemplates) -> Result<String, ReflectionError> {
        let scenes: Vec<&SceneDescription> = frames.iter().filter_map(Frame::structured).collect();
        let scenes: [&SceneDescription; 3] = scenes.try_into().map_err(|_| {
            ReflectionError::BackendUnavailable("scripted descriptor needs structured frames".into())
        })?;
        Ok(self.describe_scenes(scenes))
    }
}

/// Two-stage remote descriptor: per-scene descriptions first, then a
/// combined explanation of the event.
#[derive(Debug, Clone)]
pub struct RemoteDescriber {
    client: ChatClient,
}

impl RemoteDescriber {
    pub fn new(client: ChatClient) -> Self {
        Self { client }
    }
}

fn scene_text(index: usize, frame: &Frame) -> String {
    match &frame.payload {
        FramePayload::Structured(s) => format!(
            "Observation {} (t={}): nearest entity: {}, distance: {}, bearing: {}, contact: {}",
            index + 1,
            frame.timestep,
            s.entity.map_or("none", EntityKind::phrase),
            s.distance.map_or("-".into(), |d| format!("{d:.1} cells")),
            s.bearing.map_or("-".into(), |b| format!("{:.0} degrees", b.to_degrees())),
            if s.collision { "yes" } else { "no" },
        ),
        FramePayload::Raster(_) => format!("Observation {} (t={}): see image {}", index + 1, frame.timestep, index + 1),
    }
}

impl EventDescriber for RemoteDescriber {
    fn describe(&self, frames: &[Frame; 3], templates: &PromptTemplates) -> Result<String, ReflectionError> {
        let scenes = frames.iter().enumerate().map(|(i, f)| scene_text(i, f)).collect::<Vec<_>>().join("\n");
        let images: Vec<String> = frames
            .iter()
            .filter_map(|f| match &f.payload {
                FramePayload::Raster(r) => Some(format!(
                    "data:image/x-portable-graymap;base64,{}",
                    base64::engine::general_purpose::STANDARD.encode(r.to_pgm())
                )),
                FramePayload::Structured(_) => None,
            })
            .collect();
        let first = PromptTemplates::render(&templates.descriptor_scenes, &[("scenes", &scenes)])?;
        let per_scene = self.client.complete(&[
            ChatMessage::system(&templates.system),
            ChatMessage::user_with_images(first, &images),
        ])?;
        let second = PromptTemplates::render(&templates.descriptor_combine, &[("scene_descriptions", per_scene.trim())])?;
        let combined = self.client.complete(&[ChatMessage::system(&templates.system), ChatMessage::user(second)])?;
        let combined = combined.trim().to_string();
        if combined.is_empty() {
            return Err(ReflectionError::EmptyDescription);
        }
        Ok(combined)
    }
}
