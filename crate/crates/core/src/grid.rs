//! Lattice types shared by every stage: cells, grid geometry, occupancy.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default component edge length in cm.
pub const DEFAULT_CELL_SIZE: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("cell size must be positive, got {0}")]
    BadCellSize(f64),
    #[error("grid dimensions must all be at least 1, got {0:?}")]
    BadDims([usize; 3]),
    #[error("cell {0} lies outside grid dims {1:?}")]
    OutOfBounds(Cell, [usize; 3]),
    #[error("workspace extent {extent:?} is smaller than a cell ({cell_size} cm)")]
    WorkspaceTooSmall { extent: [f64; 3], cell_size: f64 },
}

/// Integer lattice index `(i, j, k)`; `k` is the layer (height).
///
/// Orders lexicographically by `(i, j, k)` and serializes as `[i, j, k]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[i32; 3]", into = "[i32; 3]")]
pub struct Cell {
    pub i: i32,
    pub j: i32,
    pub k: i32,
}

impl Cell {
    pub const fn new(i: i32, j: i32, k: i32) -> Self {
        Self { i, j, k }
    }

    pub fn offset(self, di: i32, dj: i32, dk: i32) -> Self {
        Self::new(self.i + di, self.j + dj, self.k + dk)
    }

    pub fn below(self) -> Self {
        self.offset(0, 0, -1)
    }

    /// Four in-layer face neighbours.
    pub fn horizontal_neighbours(self) -> [Cell; 4] {
        [
            self.offset(-1, 0, 0),
            self.offset(1, 0, 0),
            self.offset(0, -1, 0),
            self.offset(0, 1, 0),
        ]
    }

    /// All six face neighbours.
    pub fn face_neighbours(self) -> [Cell; 6] {
        let [a, b, c, d] = self.horizontal_neighbours();
        [a, b, c, d, self.offset(0, 0, -1), self.offset(0, 0, 1)]
    }

    pub fn manhattan(self, other: Cell) -> u32 {
        self.i.abs_diff(other.i) + self.j.abs_diff(other.j) + self.k.abs_diff(other.k)
    }
}

impl From<[i32; 3]> for Cell {
    fn from([i, j, k]: [i32; 3]) -> Self {
        Self { i, j, k }
    }
}

impl From<Cell> for [i32; 3] {
    fn from(c: Cell) -> Self {
        [c.i, c.j, c.k]
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.i, self.j, self.k)
    }
}

/// Regular lattice placed in world space (cm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(rename = "cell_size_cm")]
    pub cell_size: f64,
    #[serde(rename = "origin_cm")]
    pub origin: [f64; 3],
    pub dims: [usize; 3],
}

impl GridSpec {
    pub fn new(origin: [f64; 3], cell_size: f64, dims: [usize; 3]) -> Result<Self, GridError> {
        let spec = Self {
            cell_size,
            origin,
            dims,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err(GridError::BadCellSize(self.cell_size));
        }
        if self.dims.contains(&0) {
            return Err(GridError::BadDims(self.dims));
        }
        Ok(())
    }

    pub fn contains(&self, c: Cell) -> bool {
        [c.i, c.j, c.k]
            .iter()
            .zip(self.dims)
            .all(|(&x, d)| x >= 0 && (x as usize) < d)
    }

    /// Closed box of a cell.
    pub fn cell_bounds(&self, c: Cell) -> (Point3<f64>, Point3<f64>) {
        let idx = [c.i, c.j, c.k];
        let lo: [f64; 3] = std::array::from_fn(|a| self.origin[a] + idx[a] as f64 * self.cell_size);
        let hi: [f64; 3] = std::array::from_fn(|a| lo[a] + self.cell_size);
        (Point3::from(lo), Point3::from(hi))
    }

    pub fn cell_center(&self, c: Cell) -> Point3<f64> {
        let (lo, hi) = self.cell_bounds(c);
        nalgebra::center(&lo, &hi)
    }

    pub fn cell_count(&self) -> usize {
        self.dims.iter().product()
    }

    /// Every cell in `(i, j, k)` order.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        let [nx, ny, nz] = self.dims.map(|d| d as i32);
        (0..nx).flat_map(move |i| (0..ny).flat_map(move |j| (0..nz).map(move |k| Cell::new(i, j, k))))
    }
}

/// Assembly volume in cm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Workspace {
    pub extent: [f64; 3],
}

impl Default for Workspace {
    fn default() -> Self {
        Self {
            extent: [60.0, 50.0, 60.0],
        }
    }
}

impl Workspace {
    pub fn validate(&self, cell_size: f64) -> Result<(), GridError> {
        if self.extent.iter().any(|&e| !(e >= cell_size)) {
            return Err(GridError::WorkspaceTooSmall {
                extent: self.extent,
                cell_size,
            });
        }
        Ok(())
    }
}

/// Set of occupied cells over a [`GridSpec`]. Each occupied cell receives one
/// component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridJson", into = "GridJson")]
pub struct OccupancyGrid {
    pub spec: GridSpec,
    occupied: BTreeSet<Cell>,
}

impl OccupancyGrid {
    pub fn empty(spec: GridSpec) -> Self {
        Self {
            spec,
            occupied: BTreeSet::new(),
        }
    }

    pub fn from_cells(spec: GridSpec, cells: impl IntoIterator<Item = Cell>) -> Result<Self, GridError> {
        let mut grid = Self::empty(spec);
        for c in cells {
            grid.insert(c)?;
        }
        Ok(grid)
    }

    pub fn insert(&mut self, c: Cell) -> Result<bool, GridError> {
        if !self.spec.contains(c) {
            return Err(GridError::OutOfBounds(c, self.spec.dims));
        }
        Ok(self.occupied.insert(c))
    }

    pub fn remove(&mut self, c: Cell) -> bool {
        self.occupied.remove(&c)
    }

    pub fn is_occupied(&self, c: Cell) -> bool {
        self.occupied.contains(&c)
    }

    pub fn occupied(&self) -> &BTreeSet<Cell> {
        &self.occupied
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = Cell> + '_ {
        self.occupied.iter().copied()
    }

    /// Same spec, only the cells for which `keep` holds.
    pub fn retain(&self, mut keep: impl FnMut(Cell) -> bool) -> Self {
        Self {
            spec: self.spec,
            occupied: self.occupied.iter().copied().filter(|&c| keep(c)).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("grid serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

#[derive(Serialize, Deserialize)]
struct GridJson {
    cell_size_cm: f64,
    origin_cm: [f64; 3],
    dims: [usize; 3],
    occupied: Vec<Cell>,
}

impl From<OccupancyGrid> for GridJson {
    fn from(g: OccupancyGrid) -> Self {
        Self {
            cell_size_cm: g.spec.cell_size,
            origin_cm: g.spec.origin,
            dims: g.spec.dims,
            occupied: g.occupied.into_iter().collect(),
        }
    }
}

impl TryFrom<GridJson> for OccupancyGrid {
    type Error = GridError;

    fn try_from(j: GridJson) -> Result<Self, GridError> {
        let spec = GridSpec::new(j.origin_cm, j.cell_size_cm, j.dims)?;
        Self::from_cells(spec, j.occupied)
    }
}
