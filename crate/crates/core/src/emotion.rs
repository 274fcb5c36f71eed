//! The emotion layer: one axis-aligned Gaussian per occupied cell, summed
//! with per-cell weights into a scalar field that the planner reads as cost.
//!
//! Sigmas are expressed in cells. A Gaussian centred on `p` contributes
//! `w * N(q | p, diag(sx^2, sy^2))` at cell `q`, where `x` runs along columns
//! and `y` along rows.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::GeometryError;
use crate::geometry::{Cell, GridGeometry, Heading, OccupancyGrid};
use crate::reflection::EmotionScore;

pub const DEFAULT_SIGMA0: f64 = 1.0;
pub const DEFAULT_VALID_THRESHOLD: f64 = 0.05;
pub const DEFAULT_SUPPORT_SIGMAS: f64 = 6.0;
pub const DEFAULT_SIGMA_MAX: f64 = 8.0;
pub const DEFAULT_TEMPERATURE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmotionError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("occupied set is empty")]
    NoOccupiedCells,
    #[error("sigma0 must be positive and finite, got {0}")]
    BadSigma(f64),
    #[error("valid threshold {threshold} exceeds the own-Gaussian peak {peak}; some cells would have no valid Gaussian")]
    ThresholdTooHigh { threshold: f64, peak: f64 },
    #[error("heading ({}, {}) is not a unit vector", .0.x, .0.y)]
    NonUnitHeading(Heading),
    #[error("target cell {0} is not occupied")]
    UnknownTargetCell(Cell),
    #[error("emotion score total must be at least 1, got {0}")]
    NonPositiveScore(u8),
    #[error("literal update produced a non-positive sigma multiplier {0}")]
    DegenerateSigma(f64),
    #[error("update configuration invalid: {0}")]
    BadConfig(String),
}

/// Per-cell Gaussian parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmotionParams {
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub weight: f64,
}

impl EmotionParams {
    pub fn isotropic(sigma: f64, weight: f64) -> Self {
        Self { sigma_x: sigma, sigma_y: sigma, weight }
    }

    /// Unweighted density at offset `(dx, dy)` from the centre.
    #[inline]
    pub fn density(&self, dx: f64, dy: f64) -> f64 {
        let qx = dx / self.sigma_x;
        let qy = dy / self.sigma_y;
        (-0.5 * (qx * qx + qy * qy)).exp() / (2.0 * PI * self.sigma_x * self.sigma_y)
    }

    pub fn peak_density(&self) -> f64 {
        1.0 / (2.0 * PI * self.sigma_x * self.sigma_y)
    }

    /// Weighted contribution at the centre cell.
    pub fn peak(&self) -> f64 {
        self.weight * self.peak_density()
    }

    #[inline]
    fn within_support(&self, dx: f64, dy: f64, support_sigmas: Option<f64>) -> bool {
        match support_sigmas {
            None => true,
            Some(k) => {
                let qx = dx / self.sigma_x;
                let qy = dy / self.sigma_y;
                qx * qx + qy * qy <= k * k
            }
        }
    }
}

/// Parameters of the one-shot update rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateConfig {
    pub temperature: f64,
    pub n_update_cells: usize,
    pub max_update_range: f64,
    pub cone_half_angle: f64,
    pub sigma_max: f64,
    /// Use the literal `sigma * v_k * ln(s / T)` multiplier without clamping
    /// to 1 or taking the absolute heading component.
    #[serde(default)]
    pub raw_multiplier: bool,
}

impl Default for UpdateConfig {
    fn default() -> Self {
        Self {
            temperature: DEFAULT_TEMPERATURE,
            n_update_cells: 5,
            max_update_range: 6.0,
            cone_half_angle: 45f64.to_radians(),
            sigma_max: DEFAULT_SIGMA_MAX,
            raw_multiplier: false,
        }
    }
}

impl UpdateConfig {
    pub fn validate(&self) -> Result<(), EmotionError> {
        let bad = |m: &str| Err(EmotionError::BadConfig(m.to_string()));
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be positive");
        }
        if self.n_update_cells == 0 {
            return bad("n_update_cells must be at least 1");
        }
        if self.max_update_range.is_nan() || self.max_update_range <= 0.0 {
            return bad("max_update_range must be positive");
        }
        if !(self.cone_half_angle > 0.0 && self.cone_half_angle <= PI) {
            return bad("cone_half_angle must lie in (0, pi]");
        }
        if !(self.sigma_max > 0.0 && self.sigma_max.is_finite()) {
            return bad("sigma_max must be positive");
        }
        Ok(())
    }

    /// Per-axis sigma multipliers `(m_x, m_y)` for a heading and score total.
    pub fn multipliers(&self, heading: Heading, total: u8) -> (f64, f64) {
        let log_term = (f64::from(total) / self.temperature).ln();
        if self.raw_multiplier {
            (heading.x * log_term, heading.y * log_term)
        } else {
            (
                (heading.x.abs() * log_term).max(1.0),
                (heading.y.abs() * log_term).max(1.0),
            )
        }
    }
}

/// Dense scalar values over a grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(geometry: &GridGeometry) -> Self {
        Self { height: geometry.height, width: geometry.width, values: vec![0.0; geometry.len()] }
    }

    pub fn get(&self, cell: Cell) -> f64 {
        self.values[cell.row as usize * self.width + cell.col as usize]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// First cell (row-major) holding the maximum value.
    pub fn argmax(&self) -> Cell {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        Cell::new((best / self.width) as i32, (best % self.width) as i32)
    }
}

/// The emotion layer of the map.
#[derive(Debug, Clone, PartialEq)]
pub struct EmotionGrid {
    geometry: GridGeometry,
    params: BTreeMap<Cell, EmotionParams>,
    valid_threshold: f64,
    /// Per-Gaussian cutoff in units of its own sigma; `None` sums every
    /// Gaussian at every cell.
    support_sigmas: Option<f64>,
}

impl EmotionGrid {
    /// Builds the layer with isotropic `sigma0` Gaussians and weights equal to
    /// the reciprocal of the number of valid Gaussians at each occupied cell.
    pub fn init(
        occupied: &BTreeSet<Cell>,
        geometry: GridGeometry,
        sigma0: f64,
        valid_threshold: f64,
    ) -> Result<Self, EmotionError> {
        geometry.validate()?;
        if occupied.is_empty() {
            return Err(EmotionError::NoOccupiedCells);
        }
        check_sigma0(sigma0, valid_threshold)?;
        if !(valid_threshold >= 0.0 && valid_threshold.is_finite()) {
            return Err(EmotionError::BadConfig(format!("valid_threshold must be >= 0, got {valid_threshold}")));
        }
        for &cell in occupied {
            geometry.check(cell)?;
        }
        let mut grid = Self {
            geometry,
            params: occupied.iter().map(|&c| (c, EmotionParams::isotropic(sigma0, 1.0))).collect(),
            valid_threshold,
            support_sigmas: Some(DEFAULT_SUPPORT_SIGMAS),
        };
        let weights: Vec<(Cell, f64)> = occupied
            .iter()
            .map(|&c| (c, 1.0 / grid.valid_count(c) as f64))
            .collect();
        for (cell, w) in weights {
            grid.params.get_mut(&cell).expect("occupied").weight = w;
        }
        Ok(grid)
    }

    /// Reassembles a grid from stored parts (used by the map archive).
    pub fn from_parts(
        geometry: GridGeometry,
        params: BTreeMap<Cell, EmotionParams>,
        valid_threshold: f64,
        support_sigmas: Option<f64>,
    ) -> Result<Self, EmotionError> {
        geometry.validate()?;
        for (&cell, p) in &params {
            geometry.check(cell)?;
            if !(p.sigma_x > 0.0 && p.sigma_y > 0.0 && p.weight >= 0.0) {
                return Err(EmotionError::BadConfig(format!("invalid parameters at {cell}")));
            }
        }
        Ok(Self { geometry, params, valid_threshold, support_sigmas })
    }

    pub fn with_support(mut self, support_sigmas: Option<f64>) -> Self {
        self.support_sigmas = support_sigmas;
        self
    }

    pub fn set_support(&mut self, support_sigmas: Option<f64>) {
        self.support_sigmas = support_sigmas;
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn valid_threshold(&self) -> f64 {
        self.valid_threshold
    }

    pub fn support_sigmas(&self) -> Option<f64> {
        self.support_sigmas
    }

    pub fn params(&self) -> &BTreeMap<Cell, EmotionParams> {
        &self.params
    }

    pub fn get(&self, cell: Cell) -> Option<&EmotionParams> {
        self.params.get(&cell)
    }

    pub fn is_occupied(&self, cell: Cell) -> bool {
        self.params.contains_key(&cell)
    }

    pub fn occupied(&self) -> impl Iterator<Item = Cell> + '_ {
        self.params.keys().copied()
    }

    pub fn occupied_set(&self) -> BTreeSet<Cell> {
        self.params.keys().copied().collect()
    }

    pub fn occupancy(&self) -> OccupancyGrid {
        OccupancyGrid::from_cells(&self.geometry, self.params.keys()).expect("cells are in bounds")
    }

    /// Number of Gaussians (own included) whose unweighted density at `at`
    /// reaches the valid threshold.
    pub fn valid_count(&self, at: Cell) -> usize {
        self.params
            .iter()
            .filter(|(c, p)| {
                let dx = f64::from(at.col - c.col);
                let dy = f64::from(at.row - c.row);
                p.density(dx, dy) >= self.valid_threshold
            })
            .count()
    }

    /// Emotion value at one cell.
    pub fn emotion_at(&self, query: Cell) -> Result<f64, EmotionError> {
        self.geometry.check(query)?;
        let mut total = 0.0;
        for (c, p) in &self.params {
            let dx = f64::from(query.col - c.col);
            let dy = f64::from(query.row - c.row);
            if p.within_support(dx, dy, self.support_sigmas) {
                total += p.weight * p.density(dx, dy);
            }
        }
        Ok(total)
    }

    /// Emotion over every cell. Contributions are accumulated per cell in the
    /// same Gaussian order as [`EmotionGrid::emotion_at`], so both agree bit for bit.
    pub fn field(&self) -> ScalarField {
        let mut field = ScalarField::zeros(&self.geometry);
        let (h, w) = (self.geometry.height as i32, self.geometry.width as i32);
        for (c, p) in &self.params {
            let (r0, r1, c0, c1) = match self.support_sigmas {
                None => (0, h - 1, 0, w - 1),
                Some(k) => {
                    let ry = (k * p.sigma_y).floor().min(f64::from(h)) as i32;
                    let rx = (k * p.sigma_x).floor().min(f64::from(w)) as i32;
                    ((c.row - ry).max(0), (c.row + ry).min(h - 1), (c.col - rx).max(0), (c.col + rx).min(w - 1))
                }
            };
            for row in r0..=r1 {
                let dy = f64::from(row - c.row);
                let base = row as usize * self.geometry.width;
                for col in c0..=c1 {
                    let dx = f64::from(col - c.col);
                    if p.within_support(dx, dy, self.support_sigmas) {
                        field.values[base + col as usize] += p.weight * p.density(dx, dy);
                    }
                }
            }
        }
        field
    }

    /// One-shot update: widen the Gaussians of `targets` along the heading
    /// and rescale their weights so each peak value is unchanged.
    pub fn apply_update(
        &mut self,
        targets: &BTreeSet<Cell>,
        heading: Heading,
        score: &EmotionScore,
        config: &UpdateConfig,
    ) -> Result<(), EmotionError> {
        config.validate()?;
        if (heading.norm() - 1.0).abs() > 1e-9 {
            return Err(EmotionError::NonUnitHeading(heading));
        }
        if score.total() < 1 {
            return Err(EmotionError::NonPositiveScore(score.total()));
        }
        if let Some(&missing) = targets.iter().find(|c| !self.params.contains_key(c)) {
            return Err(EmotionError::UnknownTargetCell(missing));
        }
        let (mx, my) = config.multipliers(heading, score.total());
        if config.raw_multiplier && (mx <= 0.0 || my <= 0.0) {
            return Err(EmotionError::DegenerateSigma(mx.min(my)));
        }
        for cell in targets {
            let p = self.params.get_mut(cell).expect("checked above");
            let sx = (p.sigma_x * mx).min(config.sigma_max);
            let sy = (p.sigma_y * my).min(config.sigma_max);
            p.weight *= (sx * sy) / (p.sigma_x * p.sigma_y);
            p.sigma_x = sx;
            p.sigma_y = sy;
        }
        Ok(())
    }

    /// Adds unmapped cells with `sigma0` Gaussians. Each new weight is the
    /// reciprocal valid count at that cell under the current parameters;
    /// existing weights are left alone. Returns the cells actually added.
    pub fn add_occupied_cells(&mut self, cells: &BTreeSet<Cell>, sigma0: f64) -> Result<Vec<Cell>, EmotionError> {
        check_sigma0(sigma0, self.valid_threshold)?;
        for &cell in cells {
            self.geometry.check(cell)?;
        }
        let added: Vec<Cell> = cells.iter().copied().filter(|c| !self.params.contains_key(c)).collect();
        for &cell in &added {
            self.params.insert(cell, EmotionParams::isotropic(sigma0, 1.0));
        }
        let weights: Vec<(Cell, f64)> = added.iter().map(|&c| (c, 1.0 / self.valid_count(c) as f64)).collect();
        for (cell, w) in weights {
            self.params.get_mut(&cell).expect("just inserted").weight = w;
        }
        Ok(added)
    }

    /// Sum of the field over all cells.
    pub fn total_mass(&self) -> f64 {
        self.field().sum()
    }
}

fn check_sigma0(sigma0: f64, valid_threshold: f64) -> Result<(), EmotionError> {
    if !(sigma0 > 0.0 && sigma0.is_finite()) {
        return Err(EmotionError::BadSigma(sigma0));
    }
    let peak = 1.0 / (2.0 * PI * sigma0 * sigma0);
    if valid_threshold > peak {
        return Err(EmotionError::ThresholdTooHigh { threshold: valid_threshold, peak });
    }
    Ok(())
}
