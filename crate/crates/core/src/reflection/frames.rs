use serde::{Deserialize, Serialize};

use super::ReflectionError;
use crate::geometry::{Cell, Heading};

/// What the robot saw or touched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    DangerSign,
    HiddenHuman,
    DynamicDoor,
    /// Mapped static structure such as a wall or furniture.
    Obstacle,
}

impl EntityKind {
    /// Static entities stay put, so the map should learn their cells.
    pub fn is_static(self) -> bool {
        matches!(self, EntityKind::DangerSign | EntityKind::Obstacle)
    }

    pub fn phrase(self) -> &'static str {
        match self {
            EntityKind::DangerSign => "a danger sign",
            EntityKind::HiddenHuman => "a person",
            EntityKind::DynamicDoor => "a door",
            EntityKind::Obstacle => "an obstacle",
        }
    }
}

/// Grayscale top-down image, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RasterImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl RasterImage {
    /// Binary PGM (P5) encoding.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

/// Structured scene summary produced by the simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDescription {
    /// Nearest visible entity, if any.
    pub entity: Option<EntityKind>,
    /// Bearing of that entity relative to the heading, radians, positive to the right.
    pub bearing: Option<f64>,
    /// Distance to the entity in cells.
    pub distance: Option<f64>,
    pub collision: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FramePayload {
    Raster(RasterImage),
    Structured(SceneDescription),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub timestep: u32,
    pub payload: FramePayload,
}

impl Frame {
    pub fn structured(&self) -> Option<&SceneDescription> {
        match &self.payload {
            FramePayload::Structured(s) => Some(s),
            FramePayload::Raster(_) => None,
        }
    }
}

/// One simulator step as recorded by the episode runner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub timestep: u32,
    pub agent: Cell,
    pub heading: Heading,
    pub scene: SceneDescription,
    /// Rendered only when a remote descriptor needs images.
    pub raster: Option<RasterImage>,
}

impl Observation {
    fn frame(&self) -> Frame {
        let payload = match &self.raster {
            Some(r) => FramePayload::Raster(r.clone()),
            None => FramePayload::Structured(self.scene.clone()),
        };
        Frame { timestep: self.timestep, payload }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapturedFrames {
    /// Before, at and after the event.
    pub frames: [Frame; 3],
    /// The before-frame was clamped to timestep 0.
    pub clamped: bool,
}

/// Picks the frames at `t_evt - h`, `t_evt` and `t_evt + h`.
///
/// A before-frame earlier than timestep 0 is clamped to 0 and flagged; a
/// missing event or after-frame is an error.
pub fn capture_frames(history: &[Observation], t_evt: u32, h: u32) -> Result<CapturedFrames, ReflectionError> {
    let find = |t: u32| {
        history
            .binary_search_by_key(&t, |o| o.timestep)
            .map(|i| history[i].frame())
            .map_err(|_| ReflectionError::InsufficientHistory { missing: i64::from(t) })
    };
    let clamped = t_evt < h;
    let before = find(t_evt.saturating_sub(h))?;
    let at = find(t_evt)?;
    let after = find(t_evt + h)?;
    Ok(CapturedFrames { frames: [before, at, after], clamped })
}
