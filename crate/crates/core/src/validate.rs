//! Dry-run of an assembly: replays placements and flags anything a real
//! build would trip over.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::config::AssemblyConfig;
use crate::feasibility::{run_checks, FeasibilityReport};
use crate::grid::{Cell, OccupancyGrid};
use crate::sequence::{check_sequence_connectivity, connectivity_sort, AssemblySequence, SequenceError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub cell: Cell,
    /// On the ground or touching an earlier placement.
    pub supported: bool,
    /// Nothing already placed above the target in its column.
    pub corridor_clear: bool,
    /// The travel plane clears everything placed so far.
    pub plane_clear: bool,
}

impl StepRecord {
    pub fn ok(&self) -> bool {
        self.supported && self.corridor_clear && self.plane_clear
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub ok: bool,
    pub steps: Vec<StepRecord>,
    pub first_failure: Option<usize>,
}

impl SimulationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

pub fn simulate_assembly(
    seq: &AssemblySequence,
    grid: &OccupancyGrid,
    config: &AssemblyConfig,
) -> Result<SimulationReport, SequenceError> {
    seq.ensure_covers(grid)?;
    let spec = &grid.spec;
    let mut placed: HashSet<Cell> = HashSet::with_capacity(seq.len());
    // highest placed k per column
    let mut column_top: std::collections::HashMap<(i32, i32), i32> = Default::default();
    let mut top_z = f64::NEG_INFINITY;
    let mut steps = Vec::with_capacity(seq.len());

    for &cell in &seq.cells {
        let supported = cell.k == 0 || cell.face_neighbours().iter().any(|n| placed.contains(n));
        let corridor_clear = column_top.get(&(cell.i, cell.j)).is_none_or(|&top| top < cell.k);
        top_z = top_z.max(spec.cell_bounds(cell).1.z);
        let plane_clear = config.movement_plane_z >= top_z + config.clearance;
        steps.push(StepRecord {
            cell,
            supported,
            corridor_clear,
            plane_clear,
        });
        placed.insert(cell);
        let top = column_top.entry((cell.i, cell.j)).or_insert(cell.k);
        *top = (*top).max(cell.k);
    }

    let first_failure = steps.iter().position(|s| !s.ok());
    Ok(SimulationReport {
        ok: first_failure.is_none(),
        steps,
        first_failure,
    })
}

/// Recomputes every check on `grid` and confirms the report's claims: all
/// final checks passed, the count matches, and an unmodified run reports the
/// grid's own first-pass statuses.
pub fn verify_report_consistency(report: &FeasibilityReport, grid: &OccupancyGrid, config: &AssemblyConfig) -> bool {
    if report.final_component_count != grid.len() || !report.all_final_passed() {
        return false;
    }
    let Ok(checks) = run_checks(grid, config) else {
        return false;
    };
    if !checks[..3].iter().all(|r| r.passed()) {
        return false;
    }
    let connected = checks[3].passed()
        || connectivity_sort(grid)
            .ok()
            .and_then(|s| check_sequence_connectivity(&s, grid).ok())
            .is_some_and(|r| r.passed());
    if !connected {
        return false;
    }
    if report.modifications.is_empty() {
        report.results == checks
    } else {
        report.results.iter().any(|r| !r.passed())
    }
}
