//! Incremental shortest paths in the D* Lite style.
//!
//! The search runs backwards from the goal, so `g(s)` is the cost-to-goal of
//! `s`. When costs change only the affected vertices are repaired, and the
//! agent's movement between replans is folded into the key modifier `km`.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use super::cost::{octile, CostField};
use super::{Path, PlanError};
use crate::geometry::{Cell, NEIGHBOR_OFFSETS};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64, f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.total_cmp(&other.1))
    }
}

/// Incremental planner bound to one goal.
#[derive(Debug, Clone)]
pub struct PlannerState {
    field: CostField,
    goal: Cell,
    start: Cell,
    last_start: Cell,
    km: f64,
    g: Vec<f64>,
    rhs: Vec<f64>,
    queue: BTreeSet<(Key, usize)>,
    queued: Vec<Option<Key>>,
    expansions: usize,
}

impl PlannerState {
    pub fn new(field: CostField, start: Cell, goal: Cell) -> Result<Self, PlanError> {
        for cell in [start, goal] {
            if !field.contains(cell) {
                return Err(PlanError::OutOfBounds(cell));
            }
        }
        if field.is_blocked(start) {
            return Err(PlanError::BlockedStart(start));
        }
        let n = field.len();
        let mut state = Self {
            field,
            goal,
            start,
            last_start: start,
            km: 0.0,
            g: vec![f64::INFINITY; n],
            rhs: vec![f64::INFINITY; n],
            queue: BTreeSet::new(),
            queued: vec![None; n],
            expansions: 0,
        };
        if !state.field.is_blocked(goal) {
            let gi = state.field.index(goal);
            state.rhs[gi] = 0.0;
            let key = state.key(gi);
            state.push(gi, key);
        }
        Ok(state)
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }

    pub fn field(&self) -> &CostField {
        &self.field
    }

    /// Vertices expanded since construction.
    pub fn expansions(&self) -> usize {
        self.expansions
    }

    /// Cost-to-goal estimate of a cell (infinite when unreachable or not yet settled).
    pub fn cost_to_goal(&self, cell: Cell) -> f64 {
        self.g[self.field.index(cell)]
    }

    /// Computes the first path from `start` to the goal.
    pub fn plan(&mut self) -> Result<Path, PlanError> {
        self.compute_shortest_path();
        self.extract_path()
    }

    /// Repairs the solution after the costs of `changed` were replaced by
    /// their values in `updated`, with the agent now at `agent`.
    pub fn replan(&mut self, updated: &CostField, changed: &[Cell], agent: Cell) -> Result<Path, PlanError> {
        if updated.height() != self.field.height() || updated.width() != self.field.width() {
            return Err(PlanError::GeometryMismatch);
        }
        if !self.field.contains(agent) {
            return Err(PlanError::OutOfBounds(agent));
        }
        self.km += self.heuristic(self.last_start, agent);
        self.last_start = agent;
        self.start = agent;
        let mut touched = BTreeSet::new();
        for &cell in changed {
            if !self.field.contains(cell) {
                return Err(PlanError::OutOfBounds(cell));
            }
            self.field.copy_cell_from(updated, cell);
            touched.insert(cell);
            for n in cell.neighbors8().filter(|n| self.field.contains(*n)) {
                touched.insert(n);
            }
        }
        for cell in touched {
            let i = self.field.index(cell);
            self.update_vertex(i);
        }
        if self.field.is_blocked(agent) {
            return Err(PlanError::BlockedStart(agent));
        }
        self.compute_shortest_path();
        self.extract_path()
    }

    fn heuristic(&self, a: Cell, b: Cell) -> f64 {
        self.field.base_step_cost() * octile(a, b)
    }

    fn key(&self, i: usize) -> Key {
        let m = self.g[i].min(self.rhs[i]);
        let s = self.field.cell_at(i);
        Key(m + self.heuristic(self.start, s) + self.km, m)
    }

    fn push(&mut self, i: usize, key: Key) {
        if let Some(old) = self.queued[i].take() {
            self.queue.remove(&(old, i));
        }
        self.queue.insert((key, i));
        self.queued[i] = Some(key);
    }

    fn remove(&mut self, i: usize) {
        if let Some(old) = self.queued[i].take() {
            self.queue.remove(&(old, i));
        }
    }

    fn neighbors(&self, i: usize) -> impl Iterator<Item = Cell> + '_ {
        let c = self.field.cell_at(i);
        NEIGHBOR_OFFSETS
            .iter()
            .map(move |&(dr, dc)| c.offset(dr, dc))
            .filter(|n| self.field.contains(*n))
    }

    fn best_successor(&self, i: usize) -> (f64, Option<Cell>) {
        let c = self.field.cell_at(i);
        let mut best = (f64::INFINITY, None);
        for n in self.neighbors(i) {
            if let Some(cost) = self.field.edge_cost(c, n) {
                let total = cost + self.g[self.field.index(n)];
                if total < best.0 {
                    best = (total, Some(n));
                }
            }
        }
        best
    }

    fn update_vertex(&mut self, i: usize) {
        if self.field.cell_at(i) != self.goal {
            self.rhs[i] = if self.field.is_blocked(self.field.cell_at(i)) {
                f64::INFINITY
            } else {
                self.best_successor(i).0
            };
        } else if self.field.is_blocked(self.goal) {
            self.rhs[i] = f64::INFINITY;
        } else {
            self.rhs[i] = 0.0;
        }
        if self.g[i] != self.rhs[i] {
            let key = self.key(i);
            self.push(i, key);
        } else {
            self.remove(i);
        }
    }

    fn compute_shortest_path(&mut self) {
        let si = self.field.index(self.start);
        while let Some(&(k_old, u)) = self.queue.first() {
            let start_key = self.key(si);
            if !(k_old < start_key || self.rhs[si] != self.g[si]) {
                break;
            }
            self.expansions += 1;
            let k_new = self.key(u);
            if k_old < k_new {
                self.push(u, k_new);
            } else if self.g[u] > self.rhs[u] {
                self.g[u] = self.rhs[u];
                self.remove(u);
                let preds: Vec<usize> = self.neighbors(u).map(|n| self.field.index(n)).collect();
                for p in preds {
                    self.update_vertex(p);
                }
            } else {
                self.g[u] = f64::INFINITY;
                let mut affected: Vec<usize> = self.neighbors(u).map(|n| self.field.index(n)).collect();
                affected.push(u);
                for p in affected {
                    self.update_vertex(p);
                }
            }
        }
    }

    fn extract_path(&self) -> Result<Path, PlanError> {
        let si = self.field.index(self.start);
        if !self.g[si].is_finite() && !self.rhs[si].is_finite() {
            return Err(PlanError::NoPath { start: self.start, goal: self.goal });
        }
        let mut waypoints = vec![self.start];
        let mut total = 0.0;
        let mut current = self.start;
        while current != self.goal {
            if waypoints.len() > self.field.len() {
                return Err(PlanError::NoPath { start: self.start, goal: self.goal });
            }
            let ci = self.field.index(current);
            let (best, next) = self.best_successor(ci);
            let Some(next) = next.filter(|_| best.is_finite()) else {
                return Err(PlanError::NoPath { start: self.start, goal: self.goal });
            };
            total += self.field.edge_cost(current, next).expect("finite successor");
            waypoints.push(next);
            current = next;
        }
        Ok(Path { waypoints, total_cost: total })
    }
}
