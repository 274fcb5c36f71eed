use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{Cell, Heading, OccupancyGrid};
use crate::reflection::{EntityKind, SceneDescription};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityState {
    /// Hidden human or closed door: not blocking.
    Dormant,
    /// Triggered; becomes active when the countdown reaches zero.
    Pending { remaining: u32 },
    /// Blocking its cells.
    Active,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub kind: EntityKind,
    pub cells: Vec<Cell>,
    pub trigger_radius: i32,
    pub latency: u32,
    pub state: EntityState,
}

impl Entity {
    pub fn is_active(&self) -> bool {
        self.state == EntityState::Active
    }

    fn within_trigger(&self, agent: Cell) -> bool {
        self.cells.iter().any(|c| c.chebyshev(agent) <= self.trigger_radius)
    }

    fn covers(&self, cell: Cell) -> bool {
        self.cells.contains(&cell)
    }

    /// Activation waits while the agent stands on one of the entity's cells.
    fn activate(&mut self, agent: Cell) {
        self.state = if self.covers(agent) { EntityState::Pending { remaining: 0 } } else { EntityState::Active };
    }

    fn advance(&mut self, agent: Cell, jitter: u32, rng: &mut impl Rng) {
        match self.state {
            EntityState::Active => {}
            EntityState::Pending { remaining } => {
                if remaining <= 1 {
                    self.activate(agent);
                } else {
                    self.state = EntityState::Pending { remaining: remaining - 1 };
                }
            }
            EntityState::Dormant => {
                if self.within_trigger(agent) {
                    let delay = self.latency + if jitter > 0 { rng.random_range(0..=jitter) } else { 0 };
                    if delay == 0 {
                        self.activate(agent);
                    } else {
                        self.state = EntityState::Pending { remaining: delay };
                    }
                }
            }
        }
    }
}

/// Ground-truth world: static occupancy plus dynamic entities.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub occupancy: OccupancyGrid,
    pub entities: Vec<Entity>,
}

impl World {
    /// The entity blocking `cell`, if any.
    pub fn entity_at(&self, cell: Cell) -> Option<&Entity> {
        self.entities.iter().find(|e| e.is_active() && e.covers(cell))
    }

    pub fn is_blocked(&self, cell: Cell) -> bool {
        self.occupancy.is_occupied(cell) || self.entity_at(cell).is_some()
    }

    /// Structured view from the agent: the nearest active entity and whether
    /// this step ended in a collision.
    pub fn scene(&self, agent: Cell, heading: Heading, collision: bool) -> SceneDescription {
        let nearest = self
            .entities
            .iter()
            .filter(|e| e.is_active())
            .flat_map(|e| e.cells.iter().map(move |c| (agent.distance(*c), *c, e.kind)))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        match nearest {
            Some((d, cell, kind)) => {
                let dx = f64::from(cell.col - agent.col);
                let dy = f64::from(cell.row - agent.row);
                let rel = dy.atan2(dx) - heading.angle();
                let bearing = rel.sin().atan2(rel.cos());
                SceneDescription { entity: Some(kind), bearing: Some(bearing), distance: Some(d), collision }
            }
            None => SceneDescription { entity: None, bearing: None, distance: None, collision },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub cell: Cell,
    pub heading: Heading,
    pub goal_index: usize,
    /// Set when the last step ended in a collision.
    pub collided: bool,
}

impl AgentState {
    pub fn new(cell: Cell, heading: Heading) -> Self {
        Self { cell, heading, goal_index: 0, collided: false }
    }
}

/// What the agent asks the world to do in one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Command {
    Move { to: Cell, heading: Heading },
    Hold,
}

/// The agent tried to enter a blocked cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Collision {
    pub cell: Cell,
    pub kind: EntityKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub scene: SceneDescription,
    pub collision: Option<Collision>,
}

/// Advances the world one step: entities first (triggered by the agent's
/// position before it moves), then the agent. Moving into a blocked cell
/// leaves the agent in place and reports a collision.
pub fn step(world: &mut World, agent: &mut AgentState, command: Command, jitter: u32, rng: &mut impl Rng) -> StepOutcome {
    for entity in &mut world.entities {
        entity.advance(agent.cell, jitter, rng);
    }
    let mut collision = None;
    if let Command::Move { to, heading } = command {
        agent.heading = heading;
        if world.is_blocked(to) {
            let kind = world.entity_at(to).map_or(EntityKind::Obstacle, |e| e.kind);
            collision = Some(Collision { cell: to, kind });
        } else {
            agent.cell = to;
        }
    }
    agent.collided = collision.is_some();
    let scene = world.scene(agent.cell, agent.heading, agent.collided);
    StepOutcome { scene, collision }
}
