//! Text or mesh in, pick-and-place program out: voxelize a mesh onto a lattice
//! of identical components, check that the result can be assembled, repair it
//! when it cannot, order the placements and plan the robot moves.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod discretize;
pub mod feasibility;
pub mod fixtures;
pub mod frontend;
pub mod grid;
pub mod intersect;
pub mod mesh;
pub mod pipeline;
pub mod sequence;
pub mod shapes;
pub mod toolpath;
pub mod validate;

pub use config::{AssemblyConfig, Inventory};
pub use grid::{Cell, GridSpec, OccupancyGrid, Workspace};
pub use mesh::{MeshError, MeshFormat, TriangleMesh};
pub use pipeline::{PipelineConfig, PipelineError};
