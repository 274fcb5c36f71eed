mod common;

use common::trials::planner_trial;
use common::*;
use e2map_core::planning::{plan, CostField, PlanError};
use e2map_core::Cell;
use proptest::prelude::*;
use rand::Rng;

fn assert_close(a: f64, b: f64, what: &str) {
    assert!((a - b).abs() <= 1e-9, "{what}: {a} vs {b}");
}

#[test]
fn plan_and_replan_match_dijkstra() {
    let mut rng = rng(2024);
    let mut compared = 0;
    for map in 0..50 {
        compared += planner_trial(&mut rng, 20).unwrap_or_else(|e| panic!("map {map}: {e}"));
    }
    assert!(compared >= 500, "only {compared} comparisons made");
}

#[test]
fn raised_corridor_forces_detour() {
    // two routes from left to right: a short middle corridor and a long detour
    let g = geometry(7, 9);
    let mut blocked = vec![false; g.len()];
    for c in 2..7 {
        for r in [1, 2, 4, 5] {
            blocked[g.index(Cell::new(r, c))] = true;
        }
    }
    let base = CostField::new(&g, 1.0, vec![0.0; g.len()], blocked.clone()).unwrap();
    let (start, goal) = (Cell::new(3, 0), Cell::new(3, 8));
    let (mut state, path) = plan(base.clone(), start, goal).unwrap();
    assert!(path.waypoints.iter().all(|c| c.row == 3));
    let mut extra = vec![0.0; g.len()];
    for c in 2..7 {
        extra[g.index(Cell::new(3, c))] = 5.0;
    }
    let raised = CostField::new(&g, 1.0, extra, blocked).unwrap();
    let changed = base.changed_cells(&raised).unwrap();
    let detour = state.replan(&raised, &changed, start).unwrap();
    assert!(detour.waypoints.iter().any(|c| c.row == 0 || c.row == 6));
    assert_close(detour.total_cost, dijkstra(&raised, start, goal).unwrap(), "detour");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn plan_is_optimal_on_small_maps(
        seed in any::<u64>(),
        density in 0.0f64..0.35,
    ) {
        let mut rng = rng(seed);
        let g = geometry(10, 10);
        let blocked: Vec<bool> = (0..g.len()).map(|_| rng.random_bool(density)).collect();
        let extra: Vec<f64> = (0..g.len()).map(|_| rng.random_range(0.0..3.0)).collect();
        let field = CostField::new(&g, 1.0, extra, blocked).unwrap();
        let free: Vec<Cell> = g.cells().filter(|c| !field.is_blocked(*c)).collect();
        prop_assume!(free.len() >= 2);
        let start = free[rng.random_range(0..free.len())];
        let goal = free[rng.random_range(0..free.len())];
        let oracle = dijkstra(&field, start, goal);
        match plan(field.clone(), start, goal) {
            Ok((_, p)) => {
                prop_assert!((p.total_cost - oracle.unwrap()).abs() <= 1e-9);
                // consecutive waypoints are 8-adjacent and legal
                prop_assert!(walk_cost(&field, &p.waypoints).is_some());
            }
            Err(PlanError::NoPath { .. }) => prop_assert!(oracle.is_none()),
            Err(e) => prop_assert!(false, "{}", e),
        }
    }
}
