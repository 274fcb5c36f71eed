use std::collections::BTreeSet;

use crate::emotion::UpdateConfig;
use crate::geometry::{Cell, Heading, OccupancyGrid};

const RAY_STEP: f64 = 0.05;

/// Occupied cells associated with an event: rays are cast from the agent's
/// cell centre within `±cone_half_angle` of its heading up to
/// `max_update_range` cells, each ray stopping at the first occupied cell it
/// enters. The `n_update_cells` hits nearest to the agent are returned,
/// ordered by distance and then by `(row, col)`.
pub fn select_update_cells(occupancy: &OccupancyGrid, agent: Cell, heading: Heading, config: &UpdateConfig) -> Vec<Cell> {
    let range = config.max_update_range;
    let half = config.cone_half_angle;
    // angular spacing fine enough that neighbouring rays at full range are
    // less than a quarter cell apart
    let rays = ((2.0 * half * range / 0.25).ceil() as usize).max(1);
    let base = heading.angle();
    let origin = (f64::from(agent.col) + 0.5, f64::from(agent.row) + 0.5);
    let mut hits = BTreeSet::new();
    for k in 0..=rays {
        let theta = base - half + 2.0 * half * (k as f64) / (rays as f64);
        let (dx, dy) = (theta.cos(), theta.sin());
        let mut t = RAY_STEP;
        while t <= range {
            let cell = Cell::new((origin.1 + dy * t).floor() as i32, (origin.0 + dx * t).floor() as i32);
            if cell != agent && occupancy.contains(cell) && occupancy.is_occupied(cell) {
                hits.insert(cell);
                break;
            }
            if !occupancy.contains(cell) {
                break;
            }
            t += RAY_STEP;
        }
    }
    let mut hits: Vec<Cell> = hits.into_iter().collect();
    hits.sort_by(|a, b| agent.distance(*a).total_cmp(&agent.distance(*b)).then(a.cmp(b)));
    hits.truncate(config.n_update_cells);
    hits
}
