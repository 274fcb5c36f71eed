//! Emotion-as-cost path planning, incremental replanning and a discrete
//! path follower.

mod cost;
mod dstar;

pub use cost::{build_cost_field, move_length, octile, CostField, CostModel, DEFAULT_BASE_STEP_COST, DEFAULT_EMOTION_WEIGHT};
pub use dstar::PlannerState;

use thiserror::Error;

use crate::geometry::{Cell, Heading};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("no path from {start} to {goal}")]
    NoPath { start: Cell, goal: Cell },
    #[error("emotion and occupancy grids do not share a geometry")]
    GeometryMismatch,
    #[error("cell {0} is outside the grid")]
    OutOfBounds(Cell),
    #[error("start cell {0} is not traversable")]
    BlockedStart(Cell),
    #[error("agent at {0} is more than one cell away from the path")]
    OffPath(Cell),
    #[error("path is empty")]
    EmptyPath,
    #[error("invalid cost model: {0}")]
    BadModel(&'static str),
}

/// An 8-connected sequence of cells and its total cost under the field it was planned on.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub waypoints: Vec<Cell>,
    pub total_cost: f64,
}

impl Path {
    pub fn start(&self) -> Option<Cell> {
        self.waypoints.first().copied()
    }

    pub fn end(&self) -> Option<Cell> {
        self.waypoints.last().copied()
    }

    /// Re-sums the step costs of the waypoints under `field`.
    pub fn cost_under(&self, field: &CostField) -> Option<f64> {
        self.waypoints
            .windows(2)
            .map(|w| field.edge_cost(w[0], w[1]))
            .sum()
    }
}

/// Plans from scratch; the returned state can be repaired with
/// [`PlannerState::replan`] after costs change.
pub fn plan(field: CostField, start: Cell, goal: Cell) -> Result<(PlannerState, Path), PlanError> {
    let mut state = PlannerState::new(field, start, goal)?;
    let path = state.plan()?;
    Ok((state, path))
}

/// Command produced by the path follower.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FollowCommand {
    /// Move to an adjacent cell, facing along the move.
    Move { to: Cell, heading: Heading },
    /// The agent is on the final waypoint.
    Arrived,
}

/// Advances the agent one waypoint along `path`.
///
/// An agent on waypoint `i` is sent to waypoint `i + 1`. An agent that is
/// off the path but adjacent to a waypoint is sent to the furthest adjacent one.
pub fn follow_step(agent: Cell, path: &Path) -> Result<FollowCommand, PlanError> {
    let last = path.waypoints.len().checked_sub(1).ok_or(PlanError::EmptyPath)?;
    if let Some(i) = path.waypoints.iter().rposition(|&w| w == agent) {
        if i == last {
            return Ok(FollowCommand::Arrived);
        }
        let to = path.waypoints[i + 1];
        let heading = Heading::between(agent, to).expect("waypoints are distinct");
        return Ok(FollowCommand::Move { to, heading });
    }
    match path.waypoints.iter().rposition(|&w| w.is_adjacent8(agent)) {
        Some(j) => {
            let to = path.waypoints[j];
            let heading = Heading::between(agent, to).expect("adjacent");
            Ok(FollowCommand::Move { to, heading })
        }
        None => Err(PlanError::OffPath(agent)),
    }
}
