use std::f64::consts::PI;

use crate::emotion::ScalarField;
use crate::geometry::{Cell, OccupancyGrid};
use crate::reflection::RasterImage;

/// Emotion value mapped to full intensity: the peak of a unit-weight,
/// unit-sigma Gaussian.
pub const REFERENCE_EMOTION: f64 = 1.0 / (2.0 * PI);

const HEAT_MAX: f64 = 250.0;
const OCCUPIED_PIXEL: u8 = 255;
const ENTITY_PIXEL: u8 = 200;
const MARK_PIXEL: u8 = 0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    /// Pixels per cell side.
    pub scale: usize,
    pub reference: f64,
    pub occupancy: bool,
    pub entities: bool,
    pub trajectory: bool,
    pub goals: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self { scale: 4, reference: REFERENCE_EMOTION, occupancy: true, entities: true, trajectory: true, goals: true }
    }
}

impl RenderOptions {
    /// Heat map only.
    pub fn field_only() -> Self {
        Self { occupancy: false, entities: false, trajectory: false, goals: false, ..Self::default() }
    }
}

/// Heat value of one emotion sample: `round(min(1, E / reference) * 250)`.
pub fn heat(value: f64, reference: f64) -> u8 {
    ((value / reference).clamp(0.0, 1.0) * HEAT_MAX).round() as u8
}

/// Grayscale top-down image of the emotion field with optional overlays.
///
/// Occupied cells are white, active entities light grey, trajectory cells get
/// a black centre mark and goal cells a black outline.
pub fn render_topdown(
    field: &ScalarField,
    occupancy: Option<&OccupancyGrid>,
    entities: &[Cell],
    trajectory: &[Cell],
    goals: &[Cell],
    options: &RenderOptions,
) -> RasterImage {
    let s = options.scale.max(1);
    let (w, h) = (field.width * s, field.height * s);
    let mut pixels = vec![0u8; w * h];
    let inside = |c: Cell| c.row >= 0 && c.col >= 0 && (c.row as usize) < field.height && (c.col as usize) < field.width;
    let mut fill = |c: Cell, value: u8, pick: &dyn Fn(usize, usize) -> bool| {
        if !inside(c) {
            return;
        }
        for dy in 0..s {
            for dx in 0..s {
                if pick(dy, dx) {
                    pixels[(c.row as usize * s + dy) * w + c.col as usize * s + dx] = value;
                }
            }
        }
    };

    for row in 0..field.height {
        for col in 0..field.width {
            let cell = Cell::new(row as i32, col as i32);
            fill(cell, heat(field.get(cell), options.reference), &|_, _| true);
        }
    }
    if options.occupancy {
        if let Some(occ) = occupancy {
            for cell in occ.occupied_cells() {
                fill(cell, OCCUPIED_PIXEL, &|_, _| true);
            }
        }
    }
    if options.entities {
        for &cell in entities {
            fill(cell, ENTITY_PIXEL, &|_, _| true);
        }
    }
    if options.trajectory {
        let lo = s / 4;
        let hi = s - lo;
        for &cell in trajectory {
            fill(cell, MARK_PIXEL, &|dy, dx| (lo..hi).contains(&dy) && (lo..hi).contains(&dx));
        }
    }
    if options.goals {
        for &cell in goals {
            fill(cell, MARK_PIXEL, &|dy, dx| dy == 0 || dx == 0 || dy == s - 1 || dx == s - 1);
        }
    }
    RasterImage { width: w, height: h, pixels }
}
