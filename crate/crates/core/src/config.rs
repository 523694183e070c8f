//! Physical assembly setup: workspace, component inventory, robot geometry.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Workspace, DEFAULT_CELL_SIZE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Physical components on hand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Inventory {
    pub available_components: usize,
}

impl Default for Inventory {
    fn default() -> Self {
        Self {
            available_components: 40,
        }
    }
}

impl Inventory {
    pub fn new(available_components: usize) -> Self {
        Self { available_components }
    }
}

/// Lengths in cm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssemblyConfig {
    #[serde(rename = "workspace_cm")]
    pub workspace: Workspace,
    #[serde(rename = "cell_size_cm")]
    pub cell_size: f64,
    pub inventory: Inventory,
    /// Longest tolerated in-layer distance from an unsupported cell to support.
    pub max_unsupported: usize,
    /// Tallest tolerated free-standing column.
    pub max_stack: usize,
    /// Pick location of the next component.
    #[serde(rename = "source_cm")]
    pub source: [f64; 3],
    #[serde(rename = "movement_plane_z_cm")]
    pub movement_plane_z: f64,
    #[serde(rename = "clearance_cm")]
    pub clearance: f64,
    /// Height of the tool point above the bottom of a gripped component.
    /// Defaults to one component height (top grip).
    #[serde(rename = "tool_offset_cm")]
    pub tool_offset: Option<f64>,
    /// Allow fitting to enlarge meshes smaller than the workspace.
    pub allow_upscale: bool,
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        Self {
            workspace: Workspace::default(),
            cell_size: DEFAULT_CELL_SIZE,
            inventory: Inventory::default(),
            max_unsupported: 3,
            max_stack: 4,
            source: [-20.0, 25.0, 10.0],
            movement_plane_z: 70.0,
            clearance: 2.0,
            tool_offset: None,
            allow_upscale: false,
        }
    }
}

impl AssemblyConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return bad(format!("cell_size_cm must be positive, got {}", self.cell_size));
        }
        if let Err(e) = self.workspace.validate(self.cell_size) {
            return bad(e.to_string());
        }
        if self.inventory.available_components == 0 {
            return bad("inventory must hold at least one component".into());
        }
        if !(self.clearance >= 0.0) {
            return bad(format!("clearance_cm must be non-negative, got {}", self.clearance));
        }
        if !(self.movement_plane_z >= self.workspace.extent[2] + self.clearance) {
            return bad(format!(
                "movement plane at {} cm is below workspace height {} cm plus clearance {} cm",
                self.movement_plane_z, self.workspace.extent[2], self.clearance
            ));
        }
        if self.source.iter().any(|v| !v.is_finite()) {
            return bad("source_cm must be finite".into());
        }
        if !(self.source[2] <= self.movement_plane_z) {
            return bad("source lies above the movement plane".into());
        }
        Ok(())
    }

    pub fn tool_offset(&self) -> f64 {
        self.tool_offset.unwrap_or(self.cell_size)
    }

    pub fn max_scale(&self) -> f64 {
        if self.allow_upscale {
            f64::INFINITY
        } else {
            1.0
        }
    }
}
