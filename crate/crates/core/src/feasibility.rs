//! Fabricability checks on an occupancy grid and the rewrites that repair
//! failures: rescaling, overhang removal, stack truncation, re-sorting.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{AssemblyConfig, Inventory};
use crate::discretize::{discretize, shrink, VoxelizeOptions};
use crate::grid::{Cell, OccupancyGrid};
use crate::mesh::{bounding_box, MeshError, TriangleMesh};
use crate::sequence::{check_sequence_connectivity, connectivity_sort, naive_sort, SequenceError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeasibilityError {
    #[error("grid has no occupied cells")]
    EmptyAssembly,
    #[error(
        "cannot fit within {inventory} components: {count} cells remain and the longest edge \
         ({longest_edge:.3} cm) cannot shrink by another cell"
    )]
    CannotFit {
        longest_edge: f64,
        count: usize,
        inventory: usize,
    },
    #[error("failure handling removed every cell")]
    EmptyAfterModification,
    #[error("rescaling needs the source mesh")]
    MeshRequired,
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    ComponentCount,
    Overhang,
    VerticalStack,
    Connectivity,
}

impl CheckKind {
    pub const ALL: [CheckKind; 4] = [
        CheckKind::ComponentCount,
        CheckKind::Overhang,
        CheckKind::VerticalStack,
        CheckKind::Connectivity,
    ];

    pub fn label(self) -> &'static str {
        match self {
            CheckKind::ComponentCount => "component count",
            CheckKind::Overhang => "overhang",
            CheckKind::VerticalStack => "vertical stack",
            CheckKind::Connectivity => "connectivity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Passed,
    Failed,
}

/// Evidence attached to a failed check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Detail {
    Cell(Cell),
    Count { count: usize, limit: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult {
    pub check: CheckKind,
    pub status: CheckStatus,
    pub details: Vec<Detail>,
}

impl CheckResult {
    /// Failed exactly when there is evidence.
    pub fn new(check: CheckKind, details: Vec<Detail>) -> Self {
        let status = if details.is_empty() {
            CheckStatus::Passed
        } else {
            CheckStatus::Failed
        };
        Self { check, status, details }
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Passed
    }
}

/// One automatic rewrite, in the order applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Modification {
    Rescale {
        iterations: usize,
        scale: f64,
        component_count: usize,
    },
    RemoveOverhangs {
        removed: Vec<Cell>,
    },
    TruncateStacks {
        removed: Vec<Cell>,
    },
    ConnectivitySort,
}

/// `results` hold the statuses of the first-pass grid, before any rewrite;
/// `final_results` describe the grid that leaves the stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ReportJson", into = "ReportJson")]
pub struct FeasibilityReport {
    pub results: Vec<CheckResult>,
    pub final_results: Vec<CheckResult>,
    pub modifications: Vec<Modification>,
    pub final_component_count: usize,
}

impl FeasibilityReport {
    pub fn result(&self, check: CheckKind) -> &CheckResult {
        self.results
            .iter()
            .find(|r| r.check == check)
            .expect("report holds every check")
    }

    pub fn final_result(&self, check: CheckKind) -> &CheckResult {
        self.final_results
            .iter()
            .find(|r| r.check == check)
            .expect("report holds every check")
    }

    pub fn status(&self, check: CheckKind) -> CheckStatus {
        self.result(check).status
    }

    pub fn all_final_passed(&self) -> bool {
        self.final_results.iter().all(CheckResult::passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

#[derive(Serialize, Deserialize)]
struct ReportJson {
    checks: BTreeMap<CheckKind, CheckStatus>,
    #[serde(default)]
    details: BTreeMap<CheckKind, Vec<Detail>>,
    final_checks: BTreeMap<CheckKind, CheckStatus>,
    #[serde(default)]
    final_details: BTreeMap<CheckKind, Vec<Detail>>,
    modifications: Vec<Modification>,
    final_component_count: usize,
}

fn split(results: Vec<CheckResult>) -> (BTreeMap<CheckKind, CheckStatus>, BTreeMap<CheckKind, Vec<Detail>>) {
    let mut statuses = BTreeMap::new();
    let mut details = BTreeMap::new();
    for r in results {
        statuses.insert(r.check, r.status);
        if !r.details.is_empty() {
            details.insert(r.check, r.details);
        }
    }
    (statuses, details)
}

fn join(
    statuses: BTreeMap<CheckKind, CheckStatus>,
    mut details: BTreeMap<CheckKind, Vec<Detail>>,
) -> Result<Vec<CheckResult>, String> {
    CheckKind::ALL
        .iter()
        .map(|&kind| {
            let status = *statuses
                .get(&kind)
                .ok_or_else(|| format!("missing status for {}", kind.label()))?;
            let r = CheckResult::new(kind, details.remove(&kind).unwrap_or_default());
            if r.status != status {
                return Err(format!("{} status disagrees with its details", kind.label()));
            }
            Ok(r)
        })
        .collect()
}

impl From<FeasibilityReport> for ReportJson {
    fn from(r: FeasibilityReport) -> Self {
        let (checks, details) = split(r.results);
        let (final_checks, final_details) = split(r.final_results);
        Self {
            checks,
            details,
            final_checks,
            final_details,
            modifications: r.modifications,
            final_component_count: r.final_component_count,
        }
    }
}

impl TryFrom<ReportJson> for FeasibilityReport {
    type Error = String;

    fn try_from(j: ReportJson) -> Result<Self, String> {
        Ok(Self {
            results: join(j.checks, j.details)?,
            final_results: join(j.final_checks, j.final_details)?,
            modifications: j.modifications,
            final_component_count: j.final_component_count,
        })
    }
}

pub fn check_component_count(grid: &OccupancyGrid, inventory: Inventory) -> Result<CheckResult, FeasibilityError> {
    if grid.is_empty() {
        return Err(FeasibilityError::EmptyAssembly);
    }
    let count = grid.len();
    let limit = inventory.available_components;
    let details = if count > limit {
        vec![Detail::Count { count, limit }]
    } else {
        Vec::new()
    };
    Ok(CheckResult::new(CheckKind::ComponentCount, details))
}

/// Result of shrinking a mesh until its grid fits the inventory.
#[derive(Debug, Clone)]
pub struct Rescaled {
    pub grid: OccupancyGrid,
    pub mesh: TriangleMesh,
    /// Product of all factors applied.
    pub scale: f64,
    pub iterations: usize,
}

/// Shrinks `mesh` by one cell along its longest edge, uniformly and about its
/// bounding-box minimum, until the grid needs at most the inventory.
pub fn rescale_until_fits(
    mesh: &TriangleMesh,
    inventory: Inventory,
    cell_size: f64,
    options: VoxelizeOptions,
) -> Result<Rescaled, FeasibilityError> {
    let mut current = mesh.clone();
    let mut scale = 1.0;
    let mut iterations = 0;
    loop {
        let grid = discretize(&current, cell_size, options)?;
        if grid.len() <= inventory.available_components {
            return Ok(Rescaled {
                grid,
                mesh: current,
                scale,
                iterations,
            });
        }
        let longest = bounding_box(&current)?.longest_edge();
        if longest - cell_size < cell_size {
            return Err(FeasibilityError::CannotFit {
                longest_edge: longest,
                count: grid.len(),
                inventory: inventory.available_components,
            });
        }
        let factor = (longest - cell_size) / longest;
        current = shrink(&current, factor)?;
        scale *= factor;
        iterations += 1;
    }
}

/// In-layer distance from each unsupported cell to the nearest supported cell
/// of its layer, walking face-adjacent occupied cells. `None` when no support
/// is reachable.
///
/// A cell is supported when it sits on the ground or on an occupied cell.
pub fn unsupported_distances(grid: &OccupancyGrid) -> BTreeMap<Cell, Option<u32>> {
    let supported = |c: Cell| c.k == 0 || grid.is_occupied(c.below());
    let mut dist: HashMap<Cell, u32> = HashMap::new();
    let mut queue = VecDeque::new();
    for c in grid.iter().filter(|&c| supported(c)) {
        dist.insert(c, 0);
        queue.push_back(c);
    }
    while let Some(c) = queue.pop_front() {
        let d = dist[&c];
        for n in c.horizontal_neighbours() {
            if grid.is_occupied(n) && !dist.contains_key(&n) {
                dist.insert(n, d + 1);
                queue.push_back(n);
            }
        }
    }
    grid.iter()
        .filter(|&c| !supported(c))
        .map(|c| (c, dist.get(&c).copied()))
        .collect()
}

fn overhanging(grid: &OccupancyGrid, max_unsupported: usize) -> Vec<Cell> {
    unsupported_distances(grid)
        .into_iter()
        .filter(|(_, d)| d.is_none_or(|d| d as usize > max_unsupported))
        .map(|(c, _)| c)
        .collect()
}

pub fn check_overhang(grid: &OccupancyGrid, max_unsupported: usize) -> CheckResult {
    CheckResult::new(
        CheckKind::Overhang,
        overhanging(grid, max_unsupported)
            .into_iter()
            .map(Detail::Cell)
            .collect(),
    )
}

/// Drops overhanging cells until none remain. Removing a cell can strand the
/// cells resting on it, so this repeats to a fixpoint.
pub fn remove_overhangs(grid: &OccupancyGrid, max_unsupported: usize) -> OccupancyGrid {
    let mut current = grid.clone();
    loop {
        let bad = overhanging(&current, max_unsupported);
        if bad.is_empty() {
            return current;
        }
        for c in bad {
            current.remove(c);
        }
    }
}

/// Maximal vertical runs of cells without any in-layer neighbour, bottom
/// first, ordered by column.
pub fn free_standing_runs(grid: &OccupancyGrid) -> Vec<Vec<Cell>> {
    let free = |c: Cell| !c.horizontal_neighbours().iter().any(|&n| grid.is_occupied(n));
    let mut columns: BTreeMap<(i32, i32), Vec<i32>> = BTreeMap::new();
    for c in grid.iter().filter(|&c| free(c)) {
        columns.entry((c.i, c.j)).or_default().push(c.k);
    }
    let mut runs = Vec::new();
    for ((i, j), mut ks) in columns {
        ks.sort_unstable();
        let mut run: Vec<Cell> = Vec::new();
        for k in ks {
            if run.last().is_some_and(|last| last.k + 1 != k) {
                runs.push(std::mem::take(&mut run));
            }
            run.push(Cell::new(i, j, k));
        }
        runs.push(run);
    }
    runs
}

fn stack_excess(grid: &OccupancyGrid, max_stack: usize) -> Vec<Cell> {
    let mut excess: Vec<Cell> = free_standing_runs(grid)
        .into_iter()
        .filter(|run| run.len() > max_stack)
        .flat_map(|run| run.into_iter().skip(max_stack))
        .collect();
    excess.sort();
    excess
}

/// Fails when a free-standing column is taller than `max_stack`. Details are
/// the cells above the tolerated height.
pub fn check_vertical_stack(grid: &OccupancyGrid, max_stack: usize) -> CheckResult {
    CheckResult::new(
        CheckKind::VerticalStack,
        stack_excess(grid, max_stack).into_iter().map(Detail::Cell).collect(),
    )
}

/// Cuts every over-tall free-standing column down to `max_stack`, keeping
/// the bottom, and sweeps whatever that strands. Repeats until both the stack
/// and overhang checks pass.
pub fn truncate_stacks(grid: &OccupancyGrid, max_stack: usize, max_unsupported: usize) -> OccupancyGrid {
    let mut current = grid.clone();
    loop {
        let excess = stack_excess(&current, max_stack);
        let stranded = overhanging(&current, max_unsupported);
        if excess.is_empty() && stranded.is_empty() {
            return current;
        }
        for c in excess {
            current.remove(c);
        }
        current = remove_overhangs(&current, max_unsupported);
    }
}

fn removed_cells(before: &OccupancyGrid, after: &OccupancyGrid) -> Vec<Cell> {
    before.occupied().difference(after.occupied()).copied().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeasibilityOptions {
    pub failure_handling: bool,
    pub voxelize: VoxelizeOptions,
}

impl Default for FeasibilityOptions {
    fn default() -> Self {
        Self {
            failure_handling: true,
            voxelize: VoxelizeOptions::for_manifold(true),
        }
    }
}

/// All four checks on `grid`, with connectivity judged on the naive order.
pub fn run_checks(grid: &OccupancyGrid, config: &AssemblyConfig) -> Result<Vec<CheckResult>, FeasibilityError> {
    Ok(vec![
        check_component_count(grid, config.inventory)?,
        check_overhang(grid, config.max_unsupported),
        check_vertical_stack(grid, config.max_stack),
        check_sequence_connectivity(&naive_sort(grid), grid)?,
    ])
}

/// Voxelizes a prepared mesh and runs the checks, rewriting on failure.
pub fn run_feasibility(
    mesh: &TriangleMesh,
    config: &AssemblyConfig,
    options: FeasibilityOptions,
) -> Result<(OccupancyGrid, FeasibilityReport), FeasibilityError> {
    let first = discretize(mesh, config.cell_size, options.voxelize)?;
    run_feasibility_on_grid(&first, Some(mesh), config, options)
}

/// Same as [`run_feasibility`] from an already voxelized first-pass grid.
/// The mesh is only needed when the component count has to be repaired.
pub fn run_feasibility_on_grid(
    first: &OccupancyGrid,
    mesh: Option<&TriangleMesh>,
    config: &AssemblyConfig,
    options: FeasibilityOptions,
) -> Result<(OccupancyGrid, FeasibilityReport), FeasibilityError> {
    let results = run_checks(first, config)?;
    let mut modifications = Vec::new();
    let mut grid = first.clone();

    if options.failure_handling {
        if !results[0].passed() {
            let mesh = mesh.ok_or(FeasibilityError::MeshRequired)?;
            let r = rescale_until_fits(mesh, config.inventory, config.cell_size, options.voxelize)?;
            modifications.push(Modification::Rescale {
                iterations: r.iterations,
                scale: r.scale,
                component_count: r.grid.len(),
            });
            grid = r.grid;
        }
        if !check_overhang(&grid, config.max_unsupported).passed() {
            let next = remove_overhangs(&grid, config.max_unsupported);
            modifications.push(Modification::RemoveOverhangs {
                removed: removed_cells(&grid, &next),
            });
            grid = next;
        }
        if !check_vertical_stack(&grid, config.max_stack).passed() {
            let next = truncate_stacks(&grid, config.max_stack, config.max_unsupported);
            modifications.push(Modification::TruncateStacks {
                removed: removed_cells(&grid, &next),
            });
            grid = next;
        }
        if grid.is_empty() {
            return Err(FeasibilityError::EmptyAfterModification);
        }
    }

    let mut final_results = run_checks(&grid, config)?;
    if options.failure_handling && !final_results[3].passed() {
        let seq = connectivity_sort(&grid)?;
        final_results[3] = check_sequence_connectivity(&seq, &grid)?;
        modifications.push(Modification::ConnectivitySort);
    }

    let report = FeasibilityReport {
        results,
        final_results,
        modifications,
        final_component_count: grid.len(),
    };
    Ok((grid, report))
}
