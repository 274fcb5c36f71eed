//! Grid geometry, cell coordinates and boolean occupancy layers.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// A grid cell addressed by `(row, col)`. Row 0 is the top of the map and
/// columns grow to the right, so the map `x` axis follows columns and the
/// map `y` axis follows rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub row: i32,
    pub col: i32,
}

impl Cell {
    pub const fn new(row: i32, col: i32) -> Self {
        Self { row, col }
    }

    pub fn offset(self, drow: i32, dcol: i32) -> Self {
        Self::new(self.row + drow, self.col + dcol)
    }

    pub fn distance(self, other: Cell) -> f64 {
        let dr = f64::from(self.row - other.row);
        let dc = f64::from(self.col - other.col);
        dr.hypot(dc)
    }

    pub fn chebyshev(self, other: Cell) -> i32 {
        (self.row - other.row).abs().max((self.col - other.col).abs())
    }

    /// The 8-connected neighbourhood in `(row, col)` order.
    pub fn neighbors8(self) -> impl Iterator<Item = Cell> {
        NEIGHBOR_OFFSETS
            .iter()
            .map(move |&(dr, dc)| self.offset(dr, dc))
    }

    pub fn is_adjacent8(self, other: Cell) -> bool {
        self != other && self.chebyshev(other) == 1
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// Neighbour offsets sorted so that iteration visits successors in
/// ascending `(row, col)` order.
pub const NEIGHBOR_OFFSETS: [(i32, i32); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Size and placement of a regular grid. `resolution` is meters per cell and
/// `origin` holds the world coordinates of the corner of cell `(0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub height: usize,
    pub width: usize,
    pub resolution: f64,
    pub origin: [f64; 2],
}

impl GridGeometry {
    pub fn new(height: usize, width: usize, resolution: f64, origin: [f64; 2]) -> Result<Self, GeometryError> {
        let geometry = Self { height, width, resolution, origin };
        geometry.validate()?;
        Ok(geometry)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.height == 0 || self.width == 0 {
            return Err(GeometryError::EmptyGrid);
        }
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(GeometryError::BadResolution(self.resolution));
        }
        if i32::try_from(self.height).is_err() || i32::try_from(self.width).is_err() {
            return Err(GeometryError::TooLarge);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.row >= 0 && cell.col >= 0 && (cell.row as usize) < self.height && (cell.col as usize) < self.width
    }

    pub fn check(&self, cell: Cell) -> Result<(), GeometryError> {
        if self.contains(cell) {
            Ok(())
        } else {
            Err(GeometryError::OutOfBounds(cell))
        }
    }

    /// Row-major index of an in-bounds cell.
    pub fn index(&self, cell: Cell) -> usize {
        debug_assert!(self.contains(cell));
        cell.row as usize * self.width + cell.col as usize
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new((index / self.width) as i32, (index % self.width) as i32)
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.len()).map(|i| self.cell_at(i))
    }

    /// World coordinates `(x, y)` of the centre of `cell`.
    pub fn cell_to_world(&self, cell: Cell) -> [f64; 2] {
        [
            self.origin[0] + (f64::from(cell.col) + 0.5) * self.resolution,
            self.origin[1] + (f64::from(cell.row) + 0.5) * self.resolution,
        ]
    }

    pub fn world_to_cell(&self, point: [f64; 2]) -> Result<Cell, GeometryError> {
        let col = ((point[0] - self.origin[0]) / self.resolution).floor();
        let row = ((point[1] - self.origin[1]) / self.resolution).floor();
        if !(col.is_finite() && row.is_finite()) || col < 0.0 || row < 0.0 {
            return Err(GeometryError::WorldOutOfBounds(point));
        }
        let cell = Cell::new(row as i32, col as i32);
        if self.contains(cell) {
            Ok(cell)
        } else {
            Err(GeometryError::WorldOutOfBounds(point))
        }
    }
}

/// Dense boolean layer over a grid (true = occupied).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupancyGrid {
    geometry_dims: (usize, usize),
    cells: Vec<bool>,
}

impl OccupancyGrid {
    pub fn empty(geometry: &GridGeometry) -> Self {
        Self {
            geometry_dims: (geometry.height, geometry.width),
            cells: vec![false; geometry.len()],
        }
    }

    pub fn from_cells<'a>(geometry: &GridGeometry, occupied: impl IntoIterator<Item = &'a Cell>) -> Result<Self, GeometryError> {
        let mut grid = Self::empty(geometry);
        for &cell in occupied {
            grid.set(cell, true)?;
        }
        Ok(grid)
    }

    pub fn height(&self) -> usize {
        self.geometry_dims.0
    }

    pub fn width(&self) -> usize {
        self.geometry_dims.1
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.row >= 0 && cell.col >= 0 && (cell.row as usize) < self.height() && (cell.col as usize) < self.width()
    }

    fn idx(&self, cell: Cell) -> usize {
        cell.row as usize * self.width() + cell.col as usize
    }

    /// Out-of-bounds cells read as occupied.
    pub fn is_occupied(&self, cell: Cell) -> bool {
        !self.contains(cell) || self.cells[self.idx(cell)]
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        !self.is_occupied(cell)
    }

    pub fn set(&mut self, cell: Cell, occupied: bool) -> Result<(), GeometryError> {
        if !self.contains(cell) {
            return Err(GeometryError::OutOfBounds(cell));
        }
        let i = self.idx(cell);
        self.cells[i] = occupied;
        Ok(())
    }

    pub fn occupied_cells(&self) -> Vec<Cell> {
        let w = self.width();
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .map(|(i, _)| Cell::new((i / w) as i32, (i % w) as i32))
            .collect()
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&o| o).count()
    }

    pub fn matches(&self, geometry: &GridGeometry) -> bool {
        self.geometry_dims == (geometry.height, geometry.width)
    }
}

/// Unit heading vector `(x, y)` in map axes (x along columns, y along rows).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Heading {
    pub x: f64,
    pub y: f64,
}

impl Heading {
    pub const EAST: Heading = Heading { x: 1.0, y: 0.0 };
    pub const NORTH: Heading = Heading { x: 0.0, y: -1.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector pointing from `from` to `to`; `None` when the cells coincide.
    pub fn between(from: Cell, to: Cell) -> Option<Self> {
        let x = f64::from(to.col - from.col);
        let y = f64::from(to.row - from.row);
        let n = x.hypot(y);
        (n > 0.0).then(|| Self::new(x / n, y / n))
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn angle(&self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn from_angle(theta: f64) -> Self {
        Self::new(theta.cos(), theta.sin())
    }
}
