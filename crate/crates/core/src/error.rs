use thiserror::Error;

use crate::geometry::Cell;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("grid must have at least one row and one column")]
    EmptyGrid,
    #[error("resolution must be positive and finite, got {0}")]
    BadResolution(f64),
    #[error("grid dimensions exceed the addressable range")]
    TooLarge,
    #[error("cell {0} is outside the grid")]
    OutOfBounds(Cell),
    #[error("world point ({}, {}) is outside the grid", .0[0], .0[1])]
    WorldOutOfBounds([f64; 2]),
    #[error("grid geometries do not match")]
    Mismatch,
}
