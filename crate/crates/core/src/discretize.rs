//! Mesh to component lattice: fit to the workspace, lay the grid, mark cells.
//!
//! A cell is occupied when any triangle touches its closed box, or (for closed
//! meshes only) when its centre lies inside the solid.

use nalgebra::Point3;
use rayon::prelude::*;

use crate::grid::{Cell, GridSpec, OccupancyGrid, Workspace};
use crate::intersect::{point_in_mesh, triangle_box_overlap, SAT_EPSILON};
use crate::mesh::{bounding_box, Aabb, MeshError, TriangleMesh};

/// Relative slack when turning extents into cell counts, so that a length
/// which is a whole number of cells up to float noise does not gain a layer.
const CEIL_SLACK: f64 = 1e-9;

/// Uniformly scales `mesh` into `workspace` and moves its bounding-box minimum
/// to the origin. Returns the scaled mesh and the factor applied.
///
/// The factor is the smallest `extent / size` ratio over axes with non-zero
/// size, capped at `max_scale` (1.0 keeps small meshes at their own size).
pub fn fit_to_workspace(
    mesh: &TriangleMesh,
    workspace: &Workspace,
    max_scale: f64,
) -> Result<(TriangleMesh, f64), MeshError> {
    let bb = bounding_box(mesh)?;
    let size = bb.extent();
    let ratio = (0..3)
        .filter(|&a| size[a] > 0.0)
        .map(|a| workspace.extent[a] / size[a])
        .fold(f64::INFINITY, f64::min);
    let scale = ratio.min(max_scale);
    let scale = if scale.is_finite() { scale } else { 1.0 };
    let moved = mesh.translated(&-bb.min.coords);
    Ok((moved.scaled_about(&Point3::origin(), scale), scale))
}

/// Grid over `bbox` with `ceil(extent / cell_size)` cells per axis (at least
/// one), anchored at the box minimum.
pub fn build_grid(bbox: &Aabb, cell_size: f64) -> GridSpec {
    let extent = bbox.extent();
    let dims = [0, 1, 2].map(|a| {
        let cells = extent[a] / cell_size;
        ((cells - CEIL_SLACK * cells.max(1.0)).ceil() as usize).max(1)
    });
    GridSpec {
        cell_size,
        origin: bbox.min.coords.into(),
        dims,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VoxelizeOptions {
    /// Mark cells whose centre is inside the solid. Only sound for closed,
    /// consistently oriented meshes.
    pub fill_interior: bool,
    pub parallel: bool,
}

impl VoxelizeOptions {
    pub fn for_manifold(manifold: bool) -> Self {
        Self {
            fill_interior: manifold,
            parallel: true,
        }
    }
}

pub fn voxelize(mesh: &TriangleMesh, spec: &GridSpec, options: VoxelizeOptions) -> OccupancyGrid {
    let dims = spec.dims;
    let flat = |c: Cell| ((c.i as usize * dims[1]) + c.j as usize) * dims[2] + c.k as usize;

    let surface_cells = |tri: [Point3<f64>; 3]| -> Vec<Cell> {
        let lo = tri[0].inf(&tri[1]).inf(&tri[2]);
        let hi = tri[0].sup(&tri[1]).sup(&tri[2]);
        let range = |a: usize| {
            let o = spec.origin[a];
            let first = ((lo[a] - o - SAT_EPSILON) / spec.cell_size).floor().max(0.0) as usize;
            let last = ((hi[a] - o + SAT_EPSILON) / spec.cell_size).floor();
            if last < 0.0 {
                return 0..0;
            }
            first..(last as usize + 1).min(dims[a])
        };
        let mut hits = Vec::new();
        for i in range(0) {
            for j in range(1) {
                for k in range(2) {
                    let c = Cell::new(i as i32, j as i32, k as i32);
                    let (blo, bhi) = spec.cell_bounds(c);
                    if triangle_box_overlap(&tri, &blo, &bhi) {
                        hits.push(c);
                    }
                }
            }
        }
        hits
    };

    let mut marked = vec![false; spec.cell_count()];
    let hit_lists: Vec<Vec<Cell>> = if options.parallel {
        (0..mesh.triangles.len())
            .into_par_iter()
            .map(|t| surface_cells(mesh.triangle(t)))
            .collect()
    } else {
        mesh.triangle_points().map(surface_cells).collect()
    };
    for c in hit_lists.into_iter().flatten() {
        marked[flat(c)] = true;
    }

    if options.fill_interior && !mesh.triangles.is_empty() {
        let unmarked: Vec<Cell> = spec.cells().filter(|&c| !marked[flat(c)]).collect();
        let inside = |c: &Cell| point_in_mesh(mesh, &spec.cell_center(*c));
        let filled: Vec<Cell> = if options.parallel {
            unmarked.par_iter().filter(|c| inside(c)).copied().collect()
        } else {
            unmarked.iter().filter(|c| inside(c)).copied().collect()
        };
        for c in filled {
            marked[flat(c)] = true;
        }
    }

    let cells = spec.cells().filter(|&c| marked[flat(c)]);
    OccupancyGrid::from_cells(*spec, cells).expect("cells come from the spec")
}

pub fn component_count(grid: &OccupancyGrid) -> usize {
    grid.len()
}

/// Grid for a mesh whose bounding box starts the lattice.
pub fn discretize(mesh: &TriangleMesh, cell_size: f64, options: VoxelizeOptions) -> Result<OccupancyGrid, MeshError> {
    let bb = bounding_box(mesh)?;
    Ok(voxelize(mesh, &build_grid(&bb, cell_size), options))
}

/// Scales about the bounding-box minimum, which stays fixed.
pub(crate) fn shrink(mesh: &TriangleMesh, factor: f64) -> Result<TriangleMesh, MeshError> {
    let bb = bounding_box(mesh)?;
    Ok(mesh.scaled_about(&bb.min, factor))
}

pub fn aabb(min: [f64; 3], max: [f64; 3]) -> Aabb {
    Aabb::new(Point3::from(min), Point3::from(max))
}
