use std::fmt;

use serde::{Deserialize, Serialize};

use super::embed::TextEmbedder;
use super::ground::{ground_object, reject_outliers, select_best_cluster, ClusterStats, Connectivity, FeatureGrid};
use super::GroundingError;
use crate::geometry::{Cell, OccupancyGrid};

/// Chebyshev radius searched for a free cell when the preferred goal cell is blocked.
pub const FREE_CELL_SEARCH_RADIUS: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalApi {
    GoTo,
    GoLeftOf,
    GoRightOf,
    GoTopOf,
    GoBottomOf,
    GoBetween,
}

impl GoalApi {
    pub const ALL: [GoalApi; 6] =
        [GoalApi::GoTo, GoalApi::GoLeftOf, GoalApi::GoRightOf, GoalApi::GoTopOf, GoalApi::GoBottomOf, GoalApi::GoBetween];

    pub fn name(self) -> &'static str {
        match self {
            GoalApi::GoTo => "go_to",
            GoalApi::GoLeftOf => "go_left_of",
            GoalApi::GoRightOf => "go_right_of",
            GoalApi::GoTopOf => "go_top_of",
            GoalApi::GoBottomOf => "go_bottom_of",
            GoalApi::GoBetween => "go_between",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }

    pub fn arity(self) -> usize {
        if self == GoalApi::GoBetween {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for GoalApi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalCall {
    pub api: GoalApi,
    pub objects: Vec<String>,
}

impl GoalCall {
    pub fn new(api: GoalApi, objects: &[&str]) -> Self {
        Self { api, objects: objects.iter().map(|s| s.to_string()).collect() }
    }
}

impl fmt::Display for GoalCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.api, self.objects.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalProgram {
    pub calls: Vec<GoalCall>,
    pub source: String,
}

impl GoalProgram {
    pub fn new(calls: Vec<GoalCall>, source: impl Into<String>) -> Result<Self, GroundingError> {
        let program = Self { calls, source: source.into() };
        program.validate()?;
        Ok(program)
    }

    pub fn validate(&self) -> Result<(), GroundingError> {
        if self.calls.is_empty() {
            return Err(GroundingError::InvalidProgram("no goal calls".into()));
        }
        for call in &self.calls {
            if call.objects.len() != call.api.arity() {
                return Err(GroundingError::InvalidProgram(format!(
                    "{} takes {} object(s), got {}",
                    call.api,
                    call.api.arity(),
                    call.objects.len()
                )));
            }
            if call.objects.iter().any(|o| o.trim().is_empty()) {
                return Err(GroundingError::InvalidProgram(format!("{call} names an empty object")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundingConfig {
    pub min_cells: usize,
    pub min_avg_sim: f64,
    pub connectivity: Connectivity,
}

impl Default for GroundingConfig {
    fn default() -> Self {
        Self { min_cells: 3, min_avg_sim: 0.5, connectivity: Connectivity::Eight }
    }
}

/// Neutral class used against every object query.
pub const NEUTRAL_LABEL: &str = "other";

/// Feature map, embedder and thresholds bundled for goal resolution.
pub struct Grounder<'a> {
    pub features: &'a FeatureGrid,
    pub embedder: &'a dyn TextEmbedder,
    pub config: GroundingConfig,
}

impl<'a> Grounder<'a> {
    pub fn new(features: &'a FeatureGrid, embedder: &'a dyn TextEmbedder, config: GroundingConfig) -> Self {
        Self { features, embedder, config }
    }

    /// The surviving cluster with the highest mean similarity to `object`.
    pub fn best_cluster(&self, object: &str) -> Result<ClusterStats, GroundingError> {
        let obj = self.embedder.embed_text(object)?;
        let neutral = self.embedder.embed_text(NEUTRAL_LABEL)?;
        let result = ground_object(self.features, &obj, &neutral, self.config.connectivity)?;
        let kept = reject_outliers(result.clusters, self.config.min_cells, self.config.min_avg_sim);
        select_best_cluster(&kept)
            .cloned()
            .ok_or_else(|| GroundingError::ObjectNotFound(object.to_string()))
    }

    pub fn resolve(&self, call: &GoalCall, agent: Cell, occupancy: &OccupancyGrid) -> Result<Cell, GroundingError> {
        if call.objects.len() != call.api.arity() {
            return Err(GroundingError::InvalidProgram(format!("{call} has the wrong number of objects")));
        }
        let first = self.best_cluster(&call.objects[0])?;
        match call.api {
            GoalApi::GoTo => go_to_cell(&first, agent, occupancy),
            GoalApi::GoBetween => {
                let second = self.best_cluster(&call.objects[1])?;
                let (r1, c1) = first.centroid();
                let (r2, c2) = second.centroid();
                nearest_free(occupancy, ((r1 + r2) / 2.0, (c1 + c2) / 2.0))
            }
            dir => {
                let (extreme, step) = extreme_cell(&first, dir);
                let adjacent = extreme.offset(step.0, step.1);
                if occupancy.is_free(adjacent) {
                    Ok(adjacent)
                } else {
                    nearest_free(occupancy, (f64::from(adjacent.row), f64::from(adjacent.col)))
                }
            }
        }
    }

    /// Resolves every call in order; each goal is resolved from the previous one.
    pub fn resolve_program(&self, program: &GoalProgram, start: Cell, occupancy: &OccupancyGrid) -> Result<Vec<Cell>, GroundingError> {
        let mut pose = start;
        let mut goals = Vec::with_capacity(program.calls.len());
        for call in &program.calls {
            pose = self.resolve(call, pose, occupancy)?;
            goals.push(pose);
        }
        Ok(goals)
    }
}

/// Resolves one goal call to a free cell.
pub fn resolve_goal(
    call: &GoalCall,
    features: &FeatureGrid,
    embedder: &dyn TextEmbedder,
    agent: Cell,
    occupancy: &OccupancyGrid,
    config: &GroundingConfig,
) -> Result<Cell, GroundingError> {
    Grounder::new(features, embedder, *config).resolve(call, agent, occupancy)
}

fn by_distance_to(point: (f64, f64)) -> impl Fn(&Cell, &Cell) -> std::cmp::Ordering {
    move |a, b| {
        let da = (f64::from(a.row) - point.0).hypot(f64::from(a.col) - point.1);
        let db = (f64::from(b.row) - point.0).hypot(f64::from(b.col) - point.1);
        da.total_cmp(&db).then(a.cmp(b))
    }
}

fn as_point(c: Cell) -> (f64, f64) {
    (f64::from(c.row), f64::from(c.col))
}

fn go_to_cell(cluster: &ClusterStats, agent: Cell, occupancy: &OccupancyGrid) -> Result<Cell, GroundingError> {
    let key = by_distance_to(as_point(agent));
    let object = *cluster.cells.iter().min_by(|a, b| key(a, b)).expect("clusters are nonempty");
    let neighbour = object.neighbors8().filter(|c| occupancy.is_free(*c)).min_by(|a, b| key(a, b));
    match neighbour {
        Some(c) => Ok(c),
        None => nearest_free(occupancy, as_point(object)),
    }
}

/// The cluster cell at the requested extreme (its row or column nearest the
/// middle of the extreme edge) and the map-axis step pointing away from it.
fn extreme_cell(cluster: &ClusterStats, api: GoalApi) -> (Cell, (i32, i32)) {
    type AxisValue = fn(&Cell) -> i32;
    let (axis_value, step): (AxisValue, (i32, i32)) = match api {
        GoalApi::GoLeftOf => (|c| -c.col, (0, -1)),
        GoalApi::GoRightOf => (|c| c.col, (0, 1)),
        GoalApi::GoTopOf => (|c| -c.row, (-1, 0)),
        GoalApi::GoBottomOf => (|c| c.row, (1, 0)),
        GoalApi::GoTo | GoalApi::GoBetween => unreachable!("not a directional call"),
    };
    let best = cluster.cells.iter().map(axis_value).max().expect("clusters are nonempty");
    let edge: Vec<Cell> = cluster.cells.iter().copied().filter(|c| axis_value(c) == best).collect();
    let horizontal = step.0 == 0;
    let along = |c: &Cell| if horizontal { f64::from(c.row) } else { f64::from(c.col) };
    let mean = edge.iter().map(along).sum::<f64>() / edge.len() as f64;
    let cell = *edge
        .iter()
        .min_by(|a, b| (along(a) - mean).abs().total_cmp(&(along(b) - mean).abs()).then(a.cmp(b)))
        .expect("edge is nonempty");
    (cell, step)
}

/// Free cell nearest to `point` within [`FREE_CELL_SEARCH_RADIUS`] (Chebyshev)
/// of its rounded position; ties go to the smaller `(row, col)`.
fn nearest_free(occupancy: &OccupancyGrid, point: (f64, f64)) -> Result<Cell, GroundingError> {
    let r = FREE_CELL_SEARCH_RADIUS;
    let centre = Cell::new(point.0.round() as i32, point.1.round() as i32);
    let key = by_distance_to(point);
    (-r..=r)
        .flat_map(|dr| (-r..=r).map(move |dc| centre.offset(dr, dc)))
        .filter(|c| occupancy.is_free(*c))
        .min_by(|a, b| key(a, b))
        .ok_or(GroundingError::NoFreeCellNearGoal { near: centre, radius: r })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::geometry::GridGeometry;
    use crate::grounding::LexiconEmbedder;

    fn lexicon() -> LexiconEmbedder {
        let mut m = BTreeMap::new();
        m.insert("table".to_string(), vec![1.0, 0.0, 0.0, 0.0]);
        m.insert("chair".to_string(), vec![0.0, 1.0, 0.0, 0.0]);
        m.insert("sofa".to_string(), vec![0.0, 0.0, 1.0, 0.0]);
        m.insert("other".to_string(), vec![0.3, 0.3, 0.3, 1.0]);
        LexiconEmbedder::new(m).unwrap()
    }

    fn world(objects: &[(&str, Vec<Cell>)]) -> (FeatureGrid, OccupancyGrid) {
        let g = GridGeometry::new(12, 12, 1.0, [0.0, 0.0]).unwrap();
        let lex = lexicon();
        let labels: Vec<(&str, &[Cell])> = objects.iter().map(|(l, c)| (*l, c.as_slice())).collect();
        let f = FeatureGrid::from_labels(g, &lex, labels).unwrap();
        let cells: Vec<Cell> = objects.iter().flat_map(|(_, c)| c.iter().copied()).collect();
        (f, OccupancyGrid::from_cells(&g, &cells).unwrap())
    }

    fn row(r: i32, cols: std::ops::RangeInclusive<i32>) -> Vec<Cell> {
        cols.map(|c| Cell::new(r, c)).collect()
    }

    #[test]
    fn api_names_round_trip() {
        for api in GoalApi::ALL {
            assert_eq!(GoalApi::from_name(api.name()), Some(api));
        }
        assert_eq!(GoalApi::from_name("go_under"), None);
    }

    #[test]
    fn program_validation() {
        assert!(GoalProgram::new(vec![GoalCall::new(GoalApi::GoBetween, &["table"])], "x").is_err());
        assert!(GoalProgram::new(vec![], "x").is_err());
        assert!(GoalProgram::new(vec![GoalCall::new(GoalApi::GoTo, &["table"])], "x").is_ok());
    }

    #[test]
    fn single_cell_go_to_picks_neighbour_nearest_agent() {
        let (f, occ) = world(&[("table", vec![Cell::new(4, 4)])]);
        let lex = lexicon();
        let cfg = GroundingConfig { min_cells: 1, ..GroundingConfig::default() };
        let goal = resolve_goal(&GoalCall::new(GoalApi::GoTo, &["table"]), &f, &lex, Cell::new(0, 0), &occ, &cfg).unwrap();
        assert_eq!(goal, Cell::new(3, 3));
    }

    #[test]
    fn directional_calls_use_map_axes() {
        let (f, occ) = world(&[("table", row(5, 3..=6))]);
        let lex = lexicon();
        let g = Grounder::new(&f, &lex, GroundingConfig::default());
        let agent = Cell::new(0, 0);
        assert_eq!(g.resolve(&GoalCall::new(GoalApi::GoLeftOf, &["table"]), agent, &occ).unwrap(), Cell::new(5, 2));
        assert_eq!(g.resolve(&GoalCall::new(GoalApi::GoRightOf, &["table"]), agent, &occ).unwrap(), Cell::new(5, 7));
        assert_eq!(g.resolve(&GoalCall::new(GoalApi::GoTopOf, &["table"]), agent, &occ).unwrap(), Cell::new(4, 4));
        assert_eq!(g.resolve(&GoalCall::new(GoalApi::GoBottomOf, &["table"]), agent, &occ).unwrap(), Cell::new(6, 4));
    }

    #[test]
    fn blocked_adjacent_cell_falls_back_to_nearest_free() {
        let (f, mut occ) = world(&[("table", row(5, 3..=6))]);
        occ.set(Cell::new(5, 2), true).unwrap();
        let lex = lexicon();
        let g = Grounder::new(&f, &lex, GroundingConfig::default());
        let goal = g.resolve(&GoalCall::new(GoalApi::GoLeftOf, &["table"]), Cell::new(0, 0), &occ).unwrap();
        assert_eq!(goal, Cell::new(4, 2));
        assert!(occ.is_free(goal));
    }

    #[test]
    fn between_uses_centroid_midpoint() {
        let square = |r: i32, c: i32| vec![Cell::new(r - 1, c), Cell::new(r, c - 1), Cell::new(r, c), Cell::new(r, c + 1), Cell::new(r + 1, c)];
        let (f, occ) = world(&[("table", square(2, 2)), ("chair", square(8, 8))]);
        let lex = lexicon();
        let g = Grounder::new(&f, &lex, GroundingConfig::default());
        let goal = g.resolve(&GoalCall::new(GoalApi::GoBetween, &["table", "chair"]), Cell::new(0, 0), &occ).unwrap();
        assert_eq!(goal, Cell::new(5, 5));
    }

    #[test]
    fn missing_object_is_reported() {
        let (f, occ) = world(&[("table", row(5, 3..=6))]);
        let lex = lexicon();
        let g = Grounder::new(&f, &lex, GroundingConfig::default());
        assert_eq!(
            g.resolve(&GoalCall::new(GoalApi::GoTo, &["sofa"]), Cell::new(0, 0), &occ),
            Err(GroundingError::ObjectNotFound("sofa".into()))
        );
    }

    #[test]
    fn enclosed_goal_has_no_free_cell() {
        let g = GridGeometry::new(12, 12, 1.0, [0.0, 0.0]).unwrap();
        let all: Vec<Cell> = g.cells().collect();
        let occ = OccupancyGrid::from_cells(&g, &all).unwrap();
        assert!(matches!(nearest_free(&occ, (5.0, 5.0)), Err(GroundingError::NoFreeCellNearGoal { .. })));
    }
}
