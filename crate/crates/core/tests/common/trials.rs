//! Randomized oracle trials shared by the oracle tests and the acceptance run.
//! Each trial returns `Err` with a description of the first mismatch.

use std::collections::BTreeSet;

use e2map_core::emotion::EmotionGrid;
use e2map_core::grounding::{
    ground_object, reject_outliers, select_best_cluster, Connectivity, GoalApi, GoalCall, Grounder, GroundingConfig,
    LexiconEmbedder, TextEmbedder, FREE_CELL_SEARCH_RADIUS, NEUTRAL_LABEL,
};
use e2map_core::planning::{build_cost_field, plan, CostField, CostModel, PlanError};
use e2map_core::{Cell, GridGeometry, OccupancyGrid};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::*;

// ---- planning ----

pub const PLAN_N: usize = 20;

pub fn random_free(rng: &mut ChaCha8Rng, field: &CostField) -> Cell {
    loop {
        let c = Cell::new(rng.random_range(0..field.height() as i32), rng.random_range(0..field.width() as i32));
        if !field.is_blocked(c) {
            return c;
        }
    }
}

/// Random obstacles and a random emotion field built through the real cost pipeline.
pub fn random_cost_field(rng: &mut ChaCha8Rng) -> (GridGeometry, CostField) {
    let g = geometry(PLAN_N, PLAN_N);
    let n = rng.random_range(20..90);
    let cells = random_cells(rng, PLAN_N, PLAN_N, n);
    let params = random_params(rng, &cells);
    let emotion = EmotionGrid::from_parts(g, params, 0.05, Some(6.0)).unwrap();
    let occ = OccupancyGrid::from_cells(&g, cells.iter()).unwrap();
    let model = CostModel { emotion_weight: rng.random_range(0.0..30.0), base_step_cost: 1.0 };
    (g, build_cost_field(&emotion, &occ, &model).unwrap())
}

/// Raises, lowers, blocks or unblocks a random patch, never touching `keep`.
pub fn perturb(rng: &mut ChaCha8Rng, g: &GridGeometry, field: &CostField, keep: &[Cell]) -> CostField {
    let mut extra: Vec<f64> = g.cells().map(|c| field.extra_cost(c)).collect();
    let mut blocked: Vec<bool> = g.cells().map(|c| field.is_blocked(c)).collect();
    let (h, w) = (g.height as i32, g.width as i32);
    let (r0, c0) = (rng.random_range(0..h), rng.random_range(0..w));
    let (dr, dc) = (rng.random_range(0..5), rng.random_range(0..5));
    let mode = rng.random_range(0..4);
    for r in r0..(r0 + dr).min(h) {
        for c in c0..(c0 + dc).min(w) {
            let cell = Cell::new(r, c);
            if keep.contains(&cell) {
                continue;
            }
            let i = g.index(cell);
            match mode {
                0 => extra[i] += rng.random_range(0.5..20.0),
                1 => extra[i] *= rng.random_range(0.0..1.0),
                2 => blocked[i] = true,
                _ => blocked[i] = false,
            }
        }
    }
    CostField::new(g, field.base_step_cost(), extra, blocked).unwrap()
}

fn close(a: f64, b: f64, what: &str) -> Result<(), String> {
    if (a - b).abs() <= 1e-9 {
        Ok(())
    } else {
        Err(format!("{what}: {a} vs {b}"))
    }
}

/// One random map: an initial plan and `perturbations` replans, each checked
/// against Dijkstra from scratch. Returns the number of comparisons made.
pub fn planner_trial(rng: &mut ChaCha8Rng, perturbations: usize) -> Result<usize, String> {
    let (g, field) = random_cost_field(rng);
    let start = random_free(rng, &field);
    let goal = random_free(rng, &field);
    let oracle = dijkstra(&field, start, goal);
    let mut current = field.clone();
    let (mut state, first) = match (plan(field, start, goal), oracle) {
        (Ok((state, path)), Some(expected)) => {
            close(path.total_cost, expected, "initial plan")?;
            close(walk_cost(&current, &path.waypoints).ok_or("illegal initial path")?, path.total_cost, "initial walk")?;
            (state, path)
        }
        (Err(PlanError::NoPath { .. }), None) => return Ok(1),
        (Ok(_), None) => return Err("planner found a path the oracle did not".into()),
        (Err(e), _) => return Err(format!("initial plan failed: {e}")),
    };
    let mut agent = start;
    let mut path = Some(first);
    for step in 0..perturbations {
        if let Some(p) = &path {
            if p.waypoints.len() > 1 {
                agent = p.waypoints[1];
            }
        }
        let updated = perturb(rng, &g, &current, &[agent, goal]);
        let changed = current.changed_cells(&updated).unwrap();
        let result = state.replan(&updated, &changed, agent);
        current = updated;
        match (result, dijkstra(&current, agent, goal)) {
            (Ok(p), Some(expected)) => {
                close(p.total_cost, expected, &format!("replan {step}"))?;
                if p.start() != Some(agent) || p.end() != Some(goal) {
                    return Err(format!("replan {step}: path does not join agent and goal"));
                }
                close(walk_cost(&current, &p.waypoints).ok_or("illegal replanned path")?, p.total_cost, "replan walk")?;
                path = Some(p);
            }
            (Err(PlanError::NoPath { .. }), None) => path = None,
            (Ok(_), None) => return Err(format!("replan {step}: path found where the oracle has none")),
            (Err(e), _) => return Err(format!("replan {step}: {e}")),
        }
    }
    Ok(1 + perturbations)
}

// ---- grounding ----

pub const GROUND_H: usize = 24;
pub const GROUND_W: usize = 28;

pub fn rect_cells(r: [i32; 4]) -> BTreeSet<Cell> {
    (r[0]..=r[2]).flat_map(|row| (r[1]..=r[3]).map(move |col| Cell::new(row, col))).collect()
}

pub fn euclid(c: Cell, p: (f64, f64)) -> f64 {
    (f64::from(c.row) - p.0).hypot(f64::from(c.col) - p.1)
}

/// Brute-force nearest free cell to `p` inside the search window around its rounded position.
pub fn nearest_free_oracle(occ: &OccupancyGrid, p: (f64, f64)) -> Option<Cell> {
    let centre = Cell::new(p.0.round() as i32, p.1.round() as i32);
    let r = FREE_CELL_SEARCH_RADIUS;
    let mut best: Option<Cell> = None;
    for row in centre.row - r..=centre.row + r {
        for col in centre.col - r..=centre.col + r {
            let c = Cell::new(row, col);
            if !occ.is_free(c) {
                continue;
            }
            best = match best {
                Some(b) if euclid(b, p) < euclid(c, p) || (euclid(b, p) == euclid(c, p) && b < c) => Some(b),
                _ => Some(c),
            };
        }
    }
    best
}

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

/// Mask, clustering, filtering and best-cluster checks for every planted
/// object under both connectivities.
pub fn clustering_trial(map: &PlantedMap, lex: &LexiconEmbedder) -> Result<usize, String> {
    let neutral = lex.embed_text(NEUTRAL_LABEL).unwrap();
    let mut checks = 0;
    for obj_name in OBJECTS {
        let obj = lex.embed_text(obj_name).unwrap();
        let (mask, sim) = object_mask(&map.features, lex, obj_name);
        for connectivity in [Connectivity::Four, Connectivity::Eight] {
            let result = ground_object(&map.features, &obj, &neutral, connectivity).unwrap();
            check(result.mask == mask, || format!("{obj_name}: mask differs"))?;
            check(result.similarity.iter().zip(&sim).all(|(a, b)| (a - b).abs() <= 1e-12), || format!("{obj_name}: similarity differs"))?;
            let mut expected = flood_fill(&mask, GROUND_H, GROUND_W, connectivity == Connectivity::Eight);
            expected.sort_by_key(|c| *c.iter().next().unwrap());
            let got: Vec<BTreeSet<Cell>> = result.clusters.iter().map(|c| c.cells.iter().copied().collect()).collect();
            check(got == expected, || format!("{obj_name} {connectivity:?}: clusters differ"))?;

            let (min_cells, min_sim) = (3, 0.5);
            let mean = |cells: &BTreeSet<Cell>| cells.iter().map(|c| sim[c.row as usize * GROUND_W + c.col as usize]).sum::<f64>() / cells.len() as f64;
            let kept_expected: Vec<&BTreeSet<Cell>> = expected.iter().filter(|c| c.len() >= min_cells && mean(c) >= min_sim).collect();
            let kept = reject_outliers(result.clusters.clone(), min_cells, min_sim);
            check(kept.len() == kept_expected.len(), || format!("{obj_name}: {} clusters kept, expected {}", kept.len(), kept_expected.len()))?;
            for (k, e) in kept.iter().zip(&kept_expected) {
                check(&k.cells.iter().copied().collect::<BTreeSet<_>>() == *e, || format!("{obj_name}: kept cluster differs"))?;
                check((k.mean_similarity - mean(e)).abs() <= 1e-12, || format!("{obj_name}: mean similarity differs"))?;
            }
            if let Some(rect) = map.rects.get(obj_name) {
                let best = select_best_cluster(&kept).ok_or_else(|| format!("{obj_name}: planted object filtered out"))?;
                check(best.cells.iter().copied().collect::<BTreeSet<_>>() == rect_cells(*rect), || format!("{obj_name}: wrong best cluster"))?;
            }
            checks += 1;
        }
    }
    Ok(checks)
}

/// All six goal APIs against their declared rules for every planted object.
pub fn goal_api_trial(map: &PlantedMap, lex: &LexiconEmbedder, agent: Cell) -> Result<usize, String> {
    let g = Grounder::new(&map.features, lex, GroundingConfig::default());
    let occ = &map.occupancy;
    let resolve = |api: GoalApi, objects: &[&str]| g.resolve(&GoalCall::new(api, objects), agent, occ).map_err(|e| e.to_string());
    let names: Vec<&str> = map.rects.keys().copied().collect();
    let mut checks = 0;
    for &name in &names {
        let rect = map.rects[name];
        // go_to: object cell nearest the agent, then its free neighbour nearest the agent
        let p = (f64::from(agent.row), f64::from(agent.col));
        let key = |a: &Cell, b: &Cell| euclid(*a, p).total_cmp(&euclid(*b, p)).then(a.cmp(b));
        let nearest = rect_cells(rect).into_iter().min_by(key).unwrap();
        let expected = nearest.neighbors8().filter(|c| occ.is_free(*c)).min_by(key).unwrap();
        let got = resolve(GoalApi::GoTo, &[name])?;
        check(got == expected, || format!("go_to({name}) = {got}, expected {expected}"))?;

        // directional: middle of the extreme edge, one step outward (margins keep it free)
        let [r0, c0, r1, c1] = rect;
        let (mid_r, mid_c) = ((r0 + r1).div_euclid(2), (c0 + c1).div_euclid(2));
        for (api, want) in [
            (GoalApi::GoLeftOf, Cell::new(mid_r, c0 - 1)),
            (GoalApi::GoRightOf, Cell::new(mid_r, c1 + 1)),
            (GoalApi::GoTopOf, Cell::new(r0 - 1, mid_c)),
            (GoalApi::GoBottomOf, Cell::new(r1 + 1, mid_c)),
        ] {
            let got = resolve(api, &[name])?;
            check(got == want && occ.is_free(want), || format!("{api}({name}) = {got}, expected {want}"))?;
        }
        checks += 5;
    }
    // go_between: nearest free cell to the centroid midpoint
    for pair in names.windows(2) {
        let centroid = |r: [i32; 4]| (f64::from(r[0] + r[2]) / 2.0, f64::from(r[1] + r[3]) / 2.0);
        let (a, b) = (centroid(map.rects[pair[0]]), centroid(map.rects[pair[1]]));
        let mid = ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0);
        let got = resolve(GoalApi::GoBetween, &[pair[0], pair[1]]);
        match (nearest_free_oracle(occ, mid), got) {
            (Some(want), Ok(got)) => check(want == got, || format!("go_between({}, {}) = {got}, expected {want}", pair[0], pair[1]))?,
            (None, Err(_)) => {}
            (want, got) => return Err(format!("go_between({}, {}): {got:?} vs oracle {want:?}", pair[0], pair[1])),
        }
        checks += 1;
    }
    Ok(checks)
}

pub fn random_free_cell(rng: &mut ChaCha8Rng, occ: &OccupancyGrid) -> Cell {
    loop {
        let c = Cell::new(rng.random_range(1..occ.height() as i32 - 1), rng.random_range(1..occ.width() as i32 - 1));
        if occ.is_free(c) {
            return c;
        }
    }
}
