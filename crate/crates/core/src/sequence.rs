//! Assembly order: which component goes down when.
//!
//! A placement is buildable when the cell sits on the ground layer or shares
//! a face with something already placed. Layers are built strictly bottom-up.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feasibility::{CheckKind, CheckResult, Detail};
use crate::grid::{Cell, OccupancyGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SequenceError {
    #[error("sequence does not cover the grid: {0}")]
    SequenceGridMismatch(String),
    #[error("cell {0} cannot be reached layer by layer from the ground")]
    Unsequenceable(Cell),
    #[error("grid has no occupied cells")]
    EmptyAssembly,
}

/// Ordered placements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssemblySequence {
    pub cells: Vec<Cell>,
}

impl AssemblySequence {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("sequence serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Errors unless the sequence lists every occupied cell exactly once.
    pub fn ensure_covers(&self, grid: &OccupancyGrid) -> Result<(), SequenceError> {
        let mut seen = HashSet::with_capacity(self.cells.len());
        for c in &self.cells {
            if !seen.insert(*c) {
                return Err(SequenceError::SequenceGridMismatch(format!("{c} placed twice")));
            }
            if !grid.is_occupied(*c) {
                return Err(SequenceError::SequenceGridMismatch(format!(
                    "{c} is not an occupied cell"
                )));
            }
        }
        if seen.len() != grid.len() {
            return Err(SequenceError::SequenceGridMismatch(format!(
                "{} of {} occupied cells sequenced",
                seen.len(),
                grid.len()
            )));
        }
        Ok(())
    }
}

/// Layer by layer, then by x, then by y. No connectivity guarantee.
pub fn naive_sort(grid: &OccupancyGrid) -> AssemblySequence {
    let mut cells: Vec<Cell> = grid.iter().collect();
    cells.sort_by_key(|c| (c.k, c.i, c.j));
    AssemblySequence { cells }
}

/// Passes when every cell above the ground has a face neighbour placed
/// before it. Details name the first offender.
pub fn check_sequence_connectivity(seq: &AssemblySequence, grid: &OccupancyGrid) -> Result<CheckResult, SequenceError> {
    seq.ensure_covers(grid)?;
    let mut placed = HashSet::with_capacity(seq.len());
    let mut offender = None;
    for &c in &seq.cells {
        if c.k > 0 && !c.face_neighbours().iter().any(|n| placed.contains(n)) {
            offender = Some(c);
            break;
        }
        placed.insert(c);
    }
    Ok(CheckResult::new(
        CheckKind::Connectivity,
        offender.map(Detail::Cell).into_iter().collect(),
    ))
}

/// Connectivity-aware order.
///
/// Layers go bottom-up. Inside a layer the next cell is chosen among those on
/// the ground or touching a placed cell, preferring the smallest Manhattan
/// distance to any placed cell and then the smallest `(i, j)`.
pub fn connectivity_sort(grid: &OccupancyGrid) -> Result<AssemblySequence, SequenceError> {
    if grid.is_empty() {
        return Err(SequenceError::EmptyAssembly);
    }
    let mut layers: BTreeMap<i32, BTreeSet<(i32, i32)>> = BTreeMap::new();
    for c in grid.iter() {
        layers.entry(c.k).or_default().insert((c.i, c.j));
    }

    let mut placed: HashSet<Cell> = HashSet::with_capacity(grid.len());
    let mut order: Vec<Cell> = Vec::with_capacity(grid.len());

    for (&k, members) in &layers {
        // distance from each pending cell to the nearest placed cell
        let mut pending: BTreeMap<(i32, i32), u32> = members
            .iter()
            .map(|&(i, j)| {
                let c = Cell::new(i, j, k);
                let d = order.iter().map(|p| c.manhattan(*p)).min().unwrap_or(u32::MAX);
                ((i, j), d)
            })
            .collect();

        while !pending.is_empty() {
            let next = pending
                .iter()
                .filter(|(&(i, j), _)| {
                    let c = Cell::new(i, j, k);
                    k == 0 || c.face_neighbours().iter().any(|n| placed.contains(n))
                })
                .min_by_key(|(&ij, &d)| (d, ij))
                .map(|(&ij, _)| ij);
            let Some((i, j)) = next else {
                let &(i, j) = pending.keys().next().expect("pending is non-empty");
                return Err(SequenceError::Unsequenceable(Cell::new(i, j, k)));
            };
            pending.remove(&(i, j));
            let c = Cell::new(i, j, k);
            for (&(pi, pj), d) in pending.iter_mut() {
                *d = (*d).min(c.manhattan(Cell::new(pi, pj, k)));
            }
            placed.insert(c);
            order.push(c);
        }
    }
    Ok(AssemblySequence { cells: order })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasibility::CheckStatus;
    use crate::grid::GridSpec;
    use proptest::prelude::*;

    pub(crate) fn grid_of(cells: &[[i32; 3]]) -> OccupancyGrid {
        let spec = GridSpec::new([0.0; 3], 10.0, [8, 8, 8]).unwrap();
        OccupancyGrid::from_cells(spec, cells.iter().map(|&c| Cell::from(c))).unwrap()
    }

    fn seq(cells: &[[i32; 3]]) -> AssemblySequence {
        AssemblySequence {
            cells: cells.iter().map(|&c| Cell::from(c)).collect(),
        }
    }

    /// 5x5 slab on layer 2 over four legs inset one cell from the edges.
    pub(crate) fn table_grid() -> OccupancyGrid {
        let mut cells = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                cells.push([i, j, 2]);
            }
        }
        for (i, j) in [(1, 1), (1, 3), (3, 1), (3, 3)] {
            cells.push([i, j, 0]);
            cells.push([i, j, 1]);
        }
        grid_of(&cells)
    }

    #[test]
    fn naive_is_layer_then_x_then_y() {
        let g = grid_of(&[[0, 0, 0], [1, 0, 0], [0, 0, 1]]);
        assert_eq!(naive_sort(&g), seq(&[[0, 0, 0], [1, 0, 0], [0, 0, 1]]));
        let g = grid_of(&[[0, 0, 0], [0, 1, 0], [1, 0, 0], [1, 1, 0]]);
        assert_eq!(naive_sort(&g), seq(&[[0, 0, 0], [0, 1, 0], [1, 0, 0], [1, 1, 0]]));
    }

    #[test]
    fn naive_fails_on_table() {
        let g = table_grid();
        let r = check_sequence_connectivity(&naive_sort(&g), &g).unwrap();
        assert_eq!(r.status, CheckStatus::Failed);
        assert_eq!(r.details, vec![Detail::Cell(Cell::new(0, 0, 2))]);
    }

    #[test]
    fn connectivity_basics() {
        let g = grid_of(&[[0, 0, 0]]);
        let r = check_sequence_connectivity(&seq(&[[0, 0, 0]]), &g).unwrap();
        assert_eq!(r.status, CheckStatus::Passed);
        let g = grid_of(&[[0, 0, 0], [0, 0, 1]]);
        let r = check_sequence_connectivity(&seq(&[[0, 0, 0], [0, 0, 1]]), &g).unwrap();
        assert_eq!(r.status, CheckStatus::Passed);
        let r = check_sequence_connectivity(&seq(&[[0, 0, 1], [0, 0, 0]]), &g).unwrap();
        assert_eq!(r.status, CheckStatus::Failed);
    }

    #[test]
    fn mismatched_sequences_rejected() {
        let g = grid_of(&[[0, 0, 0], [0, 0, 1]]);
        for bad in [
            seq(&[[0, 0, 0]]),
            seq(&[[0, 0, 0], [0, 0, 0]]),
            seq(&[[0, 0, 0], [0, 0, 1], [1, 0, 0]]),
        ] {
            assert!(matches!(
                check_sequence_connectivity(&bad, &g),
                Err(SequenceError::SequenceGridMismatch(_))
            ));
        }
    }

    #[test]
    fn l_shape_traced_by_hand() {
        let g = grid_of(&[[1, 1, 0], [0, 0, 0], [1, 0, 0]]);
        assert_eq!(connectivity_sort(&g).unwrap(), seq(&[[0, 0, 0], [1, 0, 0], [1, 1, 0]]));
    }

    #[test]
    fn ground_layer_prefers_nearest() {
        // lexicographic order would jump to (0, 3) after (0, 0); proximity
        // keeps extending from what is placed
        let g = grid_of(&[[0, 0, 0], [0, 3, 0], [1, 0, 0], [2, 0, 0]]);
        assert_eq!(
            connectivity_sort(&g).unwrap(),
            seq(&[[0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 3, 0]])
        );
    }

    #[test]
    fn column_bottom_to_top() {
        let g = grid_of(&[[2, 2, 2], [2, 2, 0], [2, 2, 1]]);
        assert_eq!(connectivity_sort(&g).unwrap(), seq(&[[2, 2, 0], [2, 2, 1], [2, 2, 2]]));
    }

    #[test]
    fn table_becomes_buildable() {
        let g = table_grid();
        let s = connectivity_sort(&g).unwrap();
        let r = check_sequence_connectivity(&s, &g).unwrap();
        assert_eq!(r.status, CheckStatus::Passed);
        // the slab starts above a leg
        let first_slab = s.cells.iter().find(|c| c.k == 2).unwrap();
        assert_eq!(*first_slab, Cell::new(1, 1, 2));
    }

    #[test]
    fn arch_closed_from_above_is_unsequenceable() {
        // layer 1 cell (2,0,1) only touches the layer-2 lintel
        let g = grid_of(&[[0, 0, 0], [0, 0, 1], [0, 0, 2], [1, 0, 2], [2, 0, 2], [2, 0, 1]]);
        assert_eq!(
            connectivity_sort(&g),
            Err(SequenceError::Unsequenceable(Cell::new(2, 0, 1)))
        );
    }

    #[test]
    fn floating_layer_is_unsequenceable() {
        let g = grid_of(&[[0, 0, 0], [3, 3, 1]]);
        assert!(matches!(connectivity_sort(&g), Err(SequenceError::Unsequenceable(_))));
    }

    #[test]
    fn json_shape() {
        let s = seq(&[[0, 0, 0], [0, 0, 1]]);
        assert_eq!(s.to_json(), r#"{"cells":[[0,0,0],[0,0,1]]}"#);
        assert_eq!(AssemblySequence::from_json(&s.to_json()).unwrap(), s);
    }

    fn random_grid() -> impl Strategy<Value = OccupancyGrid> {
        proptest::collection::btree_set(proptest::array::uniform3(0i32..4), 1..40)
            .prop_map(|cells| grid_of(&cells.into_iter().collect::<Vec<_>>()))
    }

    proptest! {
        #[test]
        fn sorted_sequences_are_valid_or_rejected(g in random_grid()) {
            let naive = naive_sort(&g);
            match connectivity_sort(&g) {
                Ok(s) => {
                    let a: BTreeSet<_> = s.cells.iter().copied().collect();
                    let b: BTreeSet<_> = naive.cells.iter().copied().collect();
                    prop_assert_eq!(a, b);
                    prop_assert!(s.cells.windows(2).all(|w| w[0].k <= w[1].k));
                    prop_assert_eq!(check_sequence_connectivity(&s, &g).unwrap().status, CheckStatus::Passed);
                    prop_assert_eq!(connectivity_sort(&g).unwrap(), s);
                }
                Err(SequenceError::Unsequenceable(c)) => {
                    prop_assert!(g.is_occupied(c));
                    prop_assert!(c.k > 0);
                    // whenever the naive order works, the smart one must too
                    prop_assert_eq!(check_sequence_connectivity(&naive, &g).unwrap().status, CheckStatus::Failed);
                }
                Err(e) => prop_assert!(false, "unexpected {e}"),
            }
        }
    }
}
