use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use super::PlanError;
use crate::emotion::EmotionGrid;
use crate::geometry::{Cell, GridGeometry, OccupancyGrid};

pub const DEFAULT_EMOTION_WEIGHT: f64 = 25.0;
pub const DEFAULT_BASE_STEP_COST: f64 = 1.0;

/// Cost of entering a cell: `base_step_cost * move_length + emotion_weight * E(cell)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub emotion_weight: f64,
    pub base_step_cost: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self { emotion_weight: DEFAULT_EMOTION_WEIGHT, base_step_cost: DEFAULT_BASE_STEP_COST }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<(), PlanError> {
        if !(self.emotion_weight >= 0.0 && self.emotion_weight.is_finite()) {
            return Err(PlanError::BadModel("emotion_weight must be finite and >= 0"));
        }
        if !(self.base_step_cost > 0.0 && self.base_step_cost.is_finite()) {
            return Err(PlanError::BadModel("base_step_cost must be positive"));
        }
        Ok(())
    }
}

/// Length of an 8-connected move.
#[inline]
pub fn move_length(from: Cell, to: Cell) -> f64 {
    if from.row != to.row && from.col != to.col {
        SQRT_2
    } else {
        1.0
    }
}

/// Octile distance, the exact free-space length of an 8-connected path.
pub fn octile(a: Cell, b: Cell) -> f64 {
    let dr = (a.row - b.row).abs();
    let dc = (a.col - b.col).abs();
    let (lo, hi) = if dr < dc { (dr, dc) } else { (dc, dr) };
    f64::from(hi - lo) + SQRT_2 * f64::from(lo)
}

/// Per-cell traversal costs plus the blocked mask.
#[derive(Debug, Clone, PartialEq)]
pub struct CostField {
    height: usize,
    width: usize,
    base_step_cost: f64,
    /// `emotion_weight * E(c)` for every cell.
    extra: Vec<f64>,
    blocked: Vec<bool>,
}

impl CostField {
    pub fn new(geometry: &GridGeometry, base_step_cost: f64, extra: Vec<f64>, blocked: Vec<bool>) -> Result<Self, PlanError> {
        if extra.len() != geometry.len() || blocked.len() != geometry.len() {
            return Err(PlanError::GeometryMismatch);
        }
        Ok(Self { height: geometry.height, width: geometry.width, base_step_cost, extra, blocked })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn base_step_cost(&self) -> f64 {
        self.base_step_cost
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.row >= 0 && cell.col >= 0 && (cell.row as usize) < self.height && (cell.col as usize) < self.width
    }

    #[inline]
    pub fn index(&self, cell: Cell) -> usize {
        cell.row as usize * self.width + cell.col as usize
    }

    #[inline]
    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new((index / self.width) as i32, (index % self.width) as i32)
    }

    pub fn len(&self) -> usize {
        self.extra.len()
    }

    pub fn is_empty(&self) -> bool {
        self.extra.is_empty()
    }

    /// Out-of-bounds cells count as blocked.
    #[inline]
    pub fn is_blocked(&self, cell: Cell) -> bool {
        !self.contains(cell) || self.blocked[self.index(cell)]
    }

    pub fn extra_cost(&self, cell: Cell) -> f64 {
        self.extra[self.index(cell)]
    }

    /// Cost of moving between 8-adjacent cells, `None` when the move is not
    /// allowed. Diagonal moves may not cut a blocked corner.
    pub fn edge_cost(&self, from: Cell, to: Cell) -> Option<f64> {
        if self.is_blocked(from) || self.is_blocked(to) {
            return None;
        }
        let len = move_length(from, to);
        if len > 1.0 && (self.is_blocked(Cell::new(from.row, to.col)) || self.is_blocked(Cell::new(to.row, from.col))) {
            return None;
        }
        Some(self.base_step_cost * len + self.extra[self.index(to)])
    }

    /// Cells whose cost or blocked flag differs between two fields.
    pub fn changed_cells(&self, other: &CostField) -> Result<Vec<Cell>, PlanError> {
        if self.height != other.height || self.width != other.width {
            return Err(PlanError::GeometryMismatch);
        }
        Ok((0..self.len())
            .filter(|&i| self.extra[i] != other.extra[i] || self.blocked[i] != other.blocked[i])
            .map(|i| self.cell_at(i))
            .collect())
    }

    pub(crate) fn copy_cell_from(&mut self, other: &CostField, cell: Cell) {
        let i = self.index(cell);
        self.extra[i] = other.extra[i];
        self.blocked[i] = other.blocked[i];
    }
}

/// Combines the emotion layer and an occupancy layer into planner costs.
pub fn build_cost_field(emotion: &EmotionGrid, occupancy: &OccupancyGrid, model: &CostModel) -> Result<CostField, PlanError> {
    model.validate()?;
    let geometry = emotion.geometry();
    if !occupancy.matches(geometry) {
        return Err(PlanError::GeometryMismatch);
    }
    let field = emotion.field();
    let extra = field.values.iter().map(|e| model.emotion_weight * e).collect();
    let blocked = geometry.cells().map(|c| occupancy.is_occupied(c)).collect();
    CostField::new(geometry, model.base_step_cost, extra, blocked)
}
