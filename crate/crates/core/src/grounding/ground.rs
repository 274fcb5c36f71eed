use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::embed::{Embedding, TextEmbedder};
use super::GroundingError;
use crate::geometry::{Cell, GridGeometry};

/// Per-cell language features, row-major with `dim` values per cell. A zero
/// vector marks an unobserved cell.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    geometry: GridGeometry,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureGrid {
    pub fn zeros(geometry: GridGeometry, dim: usize) -> Result<Self, GroundingError> {
        if dim < 2 {
            return Err(GroundingError::DimensionMismatch { expected: 2, found: dim });
        }
        Ok(Self { geometry, dim, data: vec![0.0; geometry.len() * dim] })
    }

    pub fn from_raw(geometry: GridGeometry, dim: usize, data: Vec<f64>) -> Result<Self, GroundingError> {
        if dim < 2 || data.len() != geometry.len() * dim {
            return Err(GroundingError::DimensionMismatch { expected: geometry.len() * dim, found: data.len() });
        }
        Ok(Self { geometry, dim, data })
    }

    /// Paints the embedding of each label over its cells; later labels overwrite earlier ones.
    pub fn from_labels<'a>(
        geometry: GridGeometry,
        embedder: &dyn TextEmbedder,
        labels: impl IntoIterator<Item = (&'a str, &'a [Cell])>,
    ) -> Result<Self, GroundingError> {
        let mut grid = Self::zeros(geometry, embedder.dim())?;
        for (label, cells) in labels {
            let e = embedder.embed_text(label)?;
            for &cell in cells {
                grid.set(cell, &e.vector)?;
            }
        }
        Ok(grid)
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn raw(&self) -> &[f64] {
        &self.data
    }

    pub fn feature(&self, cell: Cell) -> &[f64] {
        let i = self.geometry.index(cell) * self.dim;
        &self.data[i..i + self.dim]
    }

    pub fn set(&mut self, cell: Cell, feature: &[f64]) -> Result<(), GroundingError> {
        if feature.len() != self.dim {
            return Err(GroundingError::DimensionMismatch { expected: self.dim, found: feature.len() });
        }
        if !self.geometry.contains(cell) {
            return Err(GroundingError::OutOfBounds(cell));
        }
        let i = self.geometry.index(cell) * self.dim;
        self.data[i..i + self.dim].copy_from_slice(feature);
        Ok(())
    }
}

/// Cells of one connected component with their mean object similarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    /// Sorted by `(row, col)`.
    pub cells: Vec<Cell>,
    pub mean_similarity: f64,
    pub size: usize,
}

impl ClusterStats {
    pub fn new(mut cells: Vec<Cell>, similarity: &[f64], width: usize) -> Self {
        cells.sort();
        let sum: f64 = cells.iter().map(|c| similarity[c.row as usize * width + c.col as usize]).sum();
        let size = cells.len();
        Self { mean_similarity: sum / size as f64, size, cells }
    }

    pub fn first_cell(&self) -> Cell {
        self.cells[0]
    }

    /// Mean `(row, col)` position.
    pub fn centroid(&self) -> (f64, f64) {
        let n = self.size as f64;
        let r: f64 = self.cells.iter().map(|c| f64::from(c.row)).sum();
        let c: f64 = self.cells.iter().map(|c| f64::from(c.col)).sum();
        (r / n, c / n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundingResult {
    pub height: usize,
    pub width: usize,
    pub mask: Vec<bool>,
    pub similarity: Vec<f64>,
    pub clusters: Vec<ClusterStats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Connectivity {
    Four,
    Eight,
}

/// Marks cells whose feature is closer to `obj` than to `neutral` by dot
/// product. Ties go to the neutral class, so unobserved cells never match.
pub fn ground_object(
    fgrid: &FeatureGrid,
    obj: &Embedding,
    neutral: &Embedding,
    connectivity: Connectivity,
) -> Result<GroundingResult, GroundingError> {
    for e in [obj, neutral] {
        if e.dim() != fgrid.dim() {
            return Err(GroundingError::DimensionMismatch { expected: fgrid.dim(), found: e.dim() });
        }
    }
    let geometry = fgrid.geometry();
    let mut mask = Vec::with_capacity(geometry.len());
    let mut similarity = Vec::with_capacity(geometry.len());
    for chunk in fgrid.raw().chunks_exact(fgrid.dim()) {
        let s_obj = obj.dot(chunk);
        let s_neu = neutral.dot(chunk);
        mask.push(s_obj > s_neu);
        similarity.push(s_obj);
    }
    let clusters = cluster_mask(&mask, geometry.height, geometry.width, connectivity)
        .into_iter()
        .map(|cells| ClusterStats::new(cells, &similarity, geometry.width))
        .collect();
    Ok(GroundingResult { height: geometry.height, width: geometry.width, mask, similarity, clusters })
}

/// Connected components of the true cells, ordered by each component's
/// smallest `(row, col)` cell.
pub fn cluster_mask(mask: &[bool], height: usize, width: usize, connectivity: Connectivity) -> Vec<Vec<Cell>> {
    assert_eq!(mask.len(), height * width, "mask size must match the grid");
    const FOUR: [(i32, i32); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
    let offsets: &[(i32, i32)] = match connectivity {
        Connectivity::Four => &FOUR,
        Connectivity::Eight => &crate::geometry::NEIGHBOR_OFFSETS,
    };
    let mut seen = vec![false; mask.len()];
    let mut clusters = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut cells = Vec::new();
        while let Some(i) = queue.pop_front() {
            let c = Cell::new((i / width) as i32, (i % width) as i32);
            cells.push(c);
            for &(dr, dc) in offsets {
                let n = c.offset(dr, dc);
                if n.row < 0 || n.col < 0 || n.row as usize >= height || n.col as usize >= width {
                    continue;
                }
                let j = n.row as usize * width + n.col as usize;
                if mask[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        cells.sort();
        clusters.push(cells);
    }
    clusters
}

/// Keeps clusters with at least `min_cells` cells and mean similarity of at
/// least `min_avg_sim`.
pub fn reject_outliers(clusters: Vec<ClusterStats>, min_cells: usize, min_avg_sim: f64) -> Vec<ClusterStats> {
    clusters
        .into_iter()
        .filter(|c| c.size >= min_cells && c.mean_similarity >= min_avg_sim)
        .collect()
}

/// Highest mean similarity wins; ties go to the larger cluster, then to the
/// smaller first cell.
pub fn select_best_cluster(clusters: &[ClusterStats]) -> Option<&ClusterStats> {
    clusters.iter().reduce(|best, c| {
        let better = c
            .mean_similarity
            .total_cmp(&best.mean_similarity)
            .then(c.size.cmp(&best.size))
            .then(best.first_cell().cmp(&c.first_cell()));
        if better.is_gt() {
            c
        } else {
            best
        }
    })
}
