use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::world::{Entity, EntityState, World};
use super::SimError;
use crate::geometry::{Cell, GridGeometry, OccupancyGrid};
use crate::grounding::{FeatureGrid, TextEmbedder};
use crate::reflection::EntityKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub height: usize,
    pub width: usize,
    pub resolution: f64,
    #[serde(default)]
    pub origin: [f64; 2],
}

impl GeometrySpec {
    pub fn build(&self) -> Result<GridGeometry, SimError> {
        GridGeometry::new(self.height, self.width, self.resolution, self.origin).map_err(|e| SimError::Scenario(e.to_string()))
    }
}

/// Cells carrying one lexicon label: an inclusive rectangle, explicit cells, or both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureRegion {
    pub label: String,
    /// `[row0, col0, row1, col1]`, inclusive.
    #[serde(default)]
    pub rect: Option<[i32; 4]>,
    #[serde(default)]
    pub cells: Vec<[i32; 2]>,
}

impl FeatureRegion {
    pub fn cells(&self) -> Vec<Cell> {
        let mut out: Vec<Cell> = self.cells.iter().map(|&[r, c]| Cell::new(r, c)).collect();
        if let Some([r0, c0, r1, c1]) = self.rect {
            for r in r0.min(r1)..=r0.max(r1) {
                for c in c0.min(c1)..=c0.max(c1) {
                    out.push(Cell::new(r, c));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKindSpec {
    DangerSign,
    HiddenHuman,
    DynamicDoor,
}

impl From<EntityKindSpec> for EntityKind {
    fn from(k: EntityKindSpec) -> Self {
        match k {
            EntityKindSpec::DangerSign => EntityKind::DangerSign,
            EntityKindSpec::HiddenHuman => EntityKind::HiddenHuman,
            EntityKindSpec::DynamicDoor => EntityKind::DynamicDoor,
        }
    }
}

pub const DEFAULT_TRIGGER_RADIUS: i32 = 3;
pub const DEFAULT_LATENCY: u32 = 1;

fn default_trigger_radius() -> i32 {
    DEFAULT_TRIGGER_RADIUS
}

fn default_latency() -> u32 {
    DEFAULT_LATENCY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntitySpec {
    pub kind: EntityKindSpec,
    /// Cells the entity blocks once active.
    pub cells: Vec<[i32; 2]>,
    #[serde(default = "default_trigger_radius")]
    pub trigger_radius: i32,
    /// Steps between the trigger and the entity blocking its cells.
    #[serde(default = "default_latency")]
    pub latency: u32,
}

fn default_tolerance() -> f64 {
    1.0
}

fn default_max_steps() -> u32 {
    400
}

/// A world layout plus the instruction(s) to run in it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub geometry: GeometrySpec,
    /// One string per row of runs `<count><char>` with `#` occupied and `.`
    /// free; a missing count means 1.
    pub occupancy: Vec<String>,
    #[serde(default)]
    pub features: Vec<FeatureRegion>,
    #[serde(default)]
    pub entities: Vec<EntitySpec>,
    #[serde(default)]
    pub instruction: Option<String>,
    #[serde(default)]
    pub instructions: Vec<String>,
    pub start: [i32; 2],
    #[serde(default = "default_tolerance")]
    pub goals_tolerance: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: u32,
    #[serde(default)]
    pub seed: u64,
}

/// Decodes one run-length row.
pub fn decode_row(row: &str, width: usize) -> Result<Vec<bool>, SimError> {
    let bad = |m: String| SimError::Scenario(format!("occupancy row {row:?}: {m}"));
    let mut out = Vec::with_capacity(width);
    let mut count = String::new();
    for ch in row.chars() {
        match ch {
            '0'..='9' => count.push(ch),
            '#' | '.' => {
                let n: usize = if count.is_empty() { 1 } else { count.parse().map_err(|_| bad("bad count".into()))? };
                if n == 0 {
                    return Err(bad("zero-length run".into()));
                }
                out.extend(std::iter::repeat_n(ch == '#', n));
                count.clear();
            }
            c if c.is_whitespace() => {}
            c => return Err(bad(format!("unexpected character {c:?}"))),
        }
    }
    if !count.is_empty() {
        return Err(bad("count without a cell character".into()));
    }
    if out.len() != width {
        return Err(bad(format!("decodes to {} cells, expected {width}", out.len())));
    }
    Ok(out)
}

/// Run-length encodes one row of occupancy.
pub fn encode_row(cells: &[bool]) -> String {
    let mut out = String::new();
    let mut i = 0;
    while i < cells.len() {
        let v = cells[i];
        let n = cells[i..].iter().take_while(|&&x| x == v).count();
        let ch = if v { '#' } else { '.' };
        if n > 1 {
            out.push_str(&n.to_string());
        }
        out.push(ch);
        i += n;
    }
    out
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let spec: Self = serde_json::from_str(text).map_err(|e| SimError::Scenario(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Scenario(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn geometry(&self) -> Result<GridGeometry, SimError> {
        self.geometry.build()
    }

    pub fn start(&self) -> Cell {
        Cell::new(self.start[0], self.start[1])
    }

    /// The instructions to run: `instructions`, or the single `instruction`.
    pub fn instruction_list(&self) -> Vec<String> {
        if self.instructions.is_empty() {
            self.instruction.iter().cloned().collect()
        } else {
            self.instructions.clone()
        }
    }

    pub fn occupancy_grid(&self) -> Result<OccupancyGrid, SimError> {
        let geometry = self.geometry()?;
        if self.occupancy.len() != geometry.height {
            return Err(SimError::Scenario(format!(
                "occupancy has {} rows, expected {}",
                self.occupancy.len(),
                geometry.height
            )));
        }
        let mut grid = OccupancyGrid::empty(&geometry);
        for (r, row) in self.occupancy.iter().enumerate() {
            for (c, occupied) in decode_row(row, geometry.width)?.into_iter().enumerate() {
                if occupied {
                    grid.set(Cell::new(r as i32, c as i32), true).map_err(|e| SimError::Scenario(e.to_string()))?;
                }
            }
        }
        Ok(grid)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let geometry = self.geometry()?;
        let occupancy = self.occupancy_grid()?;
        let check = |cell: Cell, what: &str| {
            if geometry.contains(cell) {
                Ok(())
            } else {
                Err(SimError::Scenario(format!("{what} cell {cell} is outside the grid")))
            }
        };
        check(self.start(), "start")?;
        if occupancy.is_occupied(self.start()) {
            return Err(SimError::Scenario(format!("start cell {} is occupied", self.start())));
        }
        for region in &self.features {
            if region.label.trim().is_empty() {
                return Err(SimError::Scenario("feature region without a label".into()));
            }
            for cell in region.cells() {
                check(cell, &region.label)?;
            }
        }
        for entity in &self.entities {
            if entity.cells.is_empty() {
                return Err(SimError::Scenario("entity without cells".into()));
            }
            if entity.trigger_radius < 0 {
                return Err(SimError::Scenario("negative trigger radius".into()));
            }
            for &[r, c] in &entity.cells {
                check(Cell::new(r, c), "entity")?;
            }
        }
        if !(self.goals_tolerance >= 0.0 && self.goals_tolerance.is_finite()) {
            return Err(SimError::Scenario("goals_tolerance must be a finite value >= 0".into()));
        }
        if self.max_steps == 0 {
            return Err(SimError::Scenario("max_steps must be positive".into()));
        }
        Ok(())
    }

    /// Occupied cells known to the prebuilt map (entities are never included).
    pub fn occupied_set(&self) -> Result<BTreeSet<Cell>, SimError> {
        Ok(self.occupancy_grid()?.occupied_cells().into_iter().collect())
    }

    pub fn feature_grid(&self, embedder: &dyn TextEmbedder) -> Result<FeatureGrid, SimError> {
        let geometry = self.geometry()?;
        let regions: Vec<(String, Vec<Cell>)> = self.features.iter().map(|f| (f.label.clone(), f.cells())).collect();
        Ok(FeatureGrid::from_labels(geometry, embedder, regions.iter().map(|(l, c)| (l.as_str(), c.as_slice())))?)
    }

    /// A fresh world with every entity in its initial state.
    pub fn world(&self) -> Result<World, SimError> {
        let entities = self
            .entities
            .iter()
            .map(|e| Entity {
                kind: e.kind.into(),
                cells: e.cells.iter().map(|&[r, c]| Cell::new(r, c)).collect(),
                trigger_radius: e.trigger_radius,
                latency: e.latency,
                state: if e.kind == EntityKindSpec::DangerSign { EntityState::Active } else { EntityState::Dormant },
            })
            .collect();
        Ok(World { occupancy: self.occupancy_grid()?, entities })
    }
}

/// One scenario file and the instructions to run in it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteEntry {
    /// Scenario path, relative to the suite file.
    pub scenario: PathBuf,
    /// Overrides the scenario's own instruction list when nonempty.
    #[serde(default)]
    pub instructions: Vec<String>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSpec {
    pub scenarios: Vec<SuiteEntry>,
    /// Also run every scenario with map updates disabled.
    #[serde(default = "default_true")]
    pub ablation: bool,
}

impl SuiteSpec {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let spec: Self = serde_json::from_str(text).map_err(|e| SimError::Scenario(e.to_string()))?;
        if spec.scenarios.is_empty() {
            return Err(SimError::Scenario("suite lists no scenarios".into()));
        }
        Ok(spec)
    }

    /// Loads the suite and every scenario it names.
    pub fn load(path: &Path) -> Result<(Self, Vec<ScenarioSpec>), SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Scenario(format!("{}: {e}", path.display())))?;
        let suite = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let scenarios = suite
            .scenarios
            .iter()
            .map(|entry| {
                let mut spec = ScenarioSpec::load(&base.join(&entry.scenario))?;
                if !entry.instructions.is_empty() {
                    spec.instructions = entry.instructions.clone();
                }
                Ok(spec)
            })
            .collect::<Result<Vec<_>, SimError>>()?;
        Ok((suite, scenarios))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_length_round_trip() {
        assert_eq!(decode_row("#3.#", 5).unwrap(), vec![true, false, false, false, true]);
        assert_eq!(decode_row("5#", 5).unwrap(), vec![true; 5]);
        assert!(decode_row("#3.", 5).is_err());
        assert!(decode_row("0#5.", 5).is_err());
        assert!(decode_row("3x", 3).is_err());
        let row = vec![true, true, false, true, false, false];
        assert_eq!(decode_row(&encode_row(&row), 6).unwrap(), row);
    }

    fn tiny() -> String {
        r##"{
            "name": "tiny",
            "geometry": {"height": 3, "width": 4, "resolution": 0.25},
            "occupancy": ["4#", "#2.#", "4#"],
            "features": [{"label": "chair", "cells": [[1, 1]]}],
            "entities": [{"kind": "danger_sign", "cells": [[1, 2]]}],
            "instruction": "go to the chair",
            "start": [1, 1]
        }"##
        .to_string()
    }

    #[test]
    fn parses_and_builds() {
        let s = ScenarioSpec::from_json(&tiny()).unwrap();
        assert_eq!(s.occupied_set().unwrap().len(), 10);
        assert_eq!(s.instruction_list(), vec!["go to the chair".to_string()]);
        let w = s.world().unwrap();
        assert!(w.is_blocked(Cell::new(1, 2)));
        assert_eq!(s.max_steps, 400);
    }

    #[test]
    fn rejects_bad_scenarios() {
        assert!(ScenarioSpec::from_json(&tiny().replace("[1, 1]\n", "[0, 0]\n")).is_err());
        assert!(ScenarioSpec::from_json(&tiny().replace("\"#2.#\"", "\"#3.#\"")).is_err());
        assert!(ScenarioSpec::from_json(&tiny().replace("\"name\"", "\"nmae\"")).is_err());
    }
}
