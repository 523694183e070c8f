//! Pick-and-place program for a sequence: fixed pick point, travel on a safe
//! plane, vertical descents. Also motion parameters and time estimates.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::AssemblyConfig;
use crate::grid::{Cell, OccupancyGrid};
use crate::sequence::{AssemblySequence, SequenceError};

/// Gripper open/close time added per actuation, in seconds.
pub const ACTUATION_DWELL_S: f64 = 0.5;

const MM_PER_CM: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ToolpathError {
    #[error("configuration violation: {0}")]
    ConfigViolation(String),
    #[error("invalid motion parameters: {0}")]
    InvalidParams(String),
    #[error("nothing to place")]
    EmptyAssembly,
    #[error(transparent)]
    Sequence(#[from] SequenceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ratio {
    /// acceleration = velocity
    OneToOne,
    /// acceleration = velocity / 2
    TwoToOne,
}

impl Ratio {
    pub fn acceleration_for(self, velocity: f64) -> f64 {
        match self {
            Ratio::OneToOne => velocity,
            Ratio::TwoToOne => velocity / 2.0,
        }
    }
}

/// Length unit the robot driver reads velocities in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedUnit {
    #[default]
    Mm,
    M,
}

impl SpeedUnit {
    fn per_mm(self) -> f64 {
        match self {
            SpeedUnit::Mm => 1.0,
            SpeedUnit::M => 1e-3,
        }
    }
}

/// Velocity per second and acceleration per second squared, both in `units`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsJson", into = "ParamsJson")]
pub struct MotionParams {
    pub velocity: f64,
    pub acceleration: f64,
    pub ratio: Ratio,
    pub units: SpeedUnit,
}

impl MotionParams {
    pub fn new(velocity: f64, ratio: Ratio) -> Result<Self, ToolpathError> {
        Self::with_units(velocity, ratio, SpeedUnit::Mm)
    }

    pub fn with_units(velocity: f64, ratio: Ratio, units: SpeedUnit) -> Result<Self, ToolpathError> {
        if !(velocity > 0.0 && velocity.is_finite()) {
            return Err(ToolpathError::InvalidParams(format!(
                "velocity must be positive, got {velocity}"
            )));
        }
        Ok(Self {
            velocity,
            acceleration: ratio.acceleration_for(velocity),
            ratio,
            units,
        })
    }
}

impl Default for MotionParams {
    fn default() -> Self {
        Self::new(2.0, Ratio::TwoToOne).expect("default parameters are valid")
    }
}

#[derive(Serialize, Deserialize)]
struct ParamsJson {
    velocity: f64,
    acceleration: f64,
    #[serde(default)]
    units: SpeedUnit,
}

impl From<MotionParams> for ParamsJson {
    fn from(p: MotionParams) -> Self {
        Self {
            velocity: p.velocity,
            acceleration: p.acceleration,
            units: p.units,
        }
    }
}

impl TryFrom<ParamsJson> for MotionParams {
    type Error = ToolpathError;

    fn try_from(j: ParamsJson) -> Result<Self, ToolpathError> {
        for ratio in [Ratio::OneToOne, Ratio::TwoToOne] {
            let p = Self::with_units(j.velocity, ratio, j.units)?;
            if (p.acceleration - j.acceleration).abs() <= 1e-9 * p.acceleration {
                return Ok(p);
            }
        }
        Err(ToolpathError::InvalidParams(format!(
            "acceleration {} is neither 1:1 nor 2:1 with velocity {}",
            j.acceleration, j.velocity
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Command {
    Move { xyz_mm: [f64; 3] },
    Grip,
    Release,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Toolpath {
    pub params: MotionParams,
    pub commands: Vec<Command>,
}

impl Toolpath {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("toolpath serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn moves(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        self.commands.iter().filter_map(|c| match c {
            Command::Move { xyz_mm } => Some(*xyz_mm),
            _ => None,
        })
    }
}

/// Where the tool point sits, in cm, when `cell` is released: centred over
/// the cell, one tool offset above the cell bottom.
pub fn placement_point(grid: &OccupancyGrid, cell: Cell, config: &AssemblyConfig) -> [f64; 3] {
    let (lo, _) = grid.spec.cell_bounds(cell);
    let c = grid.spec.cell_center(cell);
    [c.x, c.y, lo.z + config.tool_offset()]
}

fn check_geometry(grid: &OccupancyGrid, config: &AssemblyConfig) -> Result<(), ToolpathError> {
    config
        .validate()
        .map_err(|e| ToolpathError::ConfigViolation(e.to_string()))?;
    let spec = &grid.spec;
    let top = spec.origin[2] + spec.dims[2] as f64 * spec.cell_size;
    let highest_tool = top - spec.cell_size + config.tool_offset();
    let needed = (top + config.clearance).max(highest_tool);
    if config.movement_plane_z < needed {
        return Err(ToolpathError::ConfigViolation(format!(
            "movement plane at {} cm must be at least {needed} cm for this grid",
            config.movement_plane_z
        )));
    }
    let [sx, sy, _] = config.source;
    let inside = |v: f64, a: usize| v >= spec.origin[a] && v <= spec.origin[a] + spec.dims[a] as f64 * spec.cell_size;
    if inside(sx, 0) && inside(sy, 1) {
        return Err(ToolpathError::ConfigViolation(format!(
            "source ({sx}, {sy}) lies over the assembly footprint"
        )));
    }
    Ok(())
}

/// Eight commands per component after one opening move onto the plane above
/// the source: up, down, grip, up, across, down, release, up.
pub fn plan_toolpath(
    seq: &AssemblySequence,
    grid: &OccupancyGrid,
    config: &AssemblyConfig,
    params: MotionParams,
) -> Result<Toolpath, ToolpathError> {
    if seq.is_empty() {
        return Err(ToolpathError::EmptyAssembly);
    }
    seq.ensure_covers(grid)?;
    check_geometry(grid, config)?;

    let mm = |p: [f64; 3]| Command::Move {
        xyz_mm: p.map(|v| v * MM_PER_CM),
    };
    let [sx, sy, sz] = config.source;
    let plane = config.movement_plane_z;
    let mut commands = Vec::with_capacity(1 + 8 * seq.len());
    commands.push(mm([sx, sy, plane]));
    for &cell in &seq.cells {
        let [cx, cy, cz] = placement_point(grid, cell, config);
        commands.extend([
            mm([sx, sy, plane]),
            mm([sx, sy, sz]),
            Command::Grip,
            mm([sx, sy, plane]),
            mm([cx, cy, plane]),
            mm([cx, cy, cz]),
            Command::Release,
            mm([cx, cy, plane]),
        ]);
    }
    Ok(Toolpath { params, commands })
}

/// Time for a straight move of `d` under a trapezoidal (or, for short moves,
/// triangular) velocity profile starting and ending at rest.
pub fn segment_time(d: f64, velocity: f64, acceleration: f64) -> f64 {
    if d <= 0.0 {
        0.0
    } else if d >= velocity * velocity / acceleration {
        d / velocity + velocity / acceleration
    } else {
        2.0 * (d / acceleration).sqrt()
    }
}

/// Seconds to execute `path`, with [`ACTUATION_DWELL_S`] per grip or release.
/// The opening move is not timed since the rest pose is unknown.
pub fn estimate_duration(path: &Toolpath) -> f64 {
    estimate_duration_with_dwell(path, ACTUATION_DWELL_S)
}

pub fn estimate_duration_with_dwell(path: &Toolpath, dwell: f64) -> f64 {
    let p = &path.params;
    let mut total = 0.0;
    let mut at: Option<[f64; 3]> = None;
    for c in &path.commands {
        match c {
            Command::Move { xyz_mm } => {
                if let Some(prev) = at {
                    let d = (0..3).map(|a| (xyz_mm[a] - prev[a]).powi(2)).sum::<f64>().sqrt();
                    total += segment_time(d * p.units.per_mm(), p.velocity, p.acceleration);
                }
                at = Some(*xyz_mm);
            }
            Command::Grip | Command::Release => total += dwell,
        }
    }
    total
}

/// Velocity sweep from `start` to `max` in steps of `increment`, each at both
/// acceleration ratios, 1:1 first.
pub fn calibration_schedule(start: f64, increment: f64, max: f64) -> Result<Vec<MotionParams>, ToolpathError> {
    if !(increment > 0.0) || !(start <= max) {
        return Err(ToolpathError::InvalidParams(format!(
            "sweep {start}..={max} by {increment} is empty"
        )));
    }
    let steps = ((max - start) / increment + 1e-9).floor() as usize;
    let mut out = Vec::with_capacity(2 * (steps + 1));
    for n in 0..=steps {
        let v = start + n as f64 * increment;
        out.push(MotionParams::new(v, Ratio::OneToOne)?);
        out.push(MotionParams::new(v, Ratio::TwoToOne)?);
    }
    Ok(out)
}

/// The sweep used to pick the operating point: 1 to 2.5 by 0.5.
pub fn default_calibration_schedule() -> Vec<MotionParams> {
    calibration_schedule(1.0, 0.5, 2.5).expect("default sweep is non-empty")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolpathFormat {
    Json,
    RobotScript,
}

impl std::str::FromStr for ToolpathFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(Self::Json),
            "robot_script" => Ok(Self::RobotScript),
            other => Err(format!("unknown toolpath format {other:?}")),
        }
    }
}

pub fn emit_toolpath(path: &Toolpath, format: ToolpathFormat) -> Vec<u8> {
    match format {
        ToolpathFormat::Json => path.to_json().into_bytes(),
        ToolpathFormat::RobotScript => {
            let (v, a) = (path.params.velocity, path.params.acceleration);
            let mut out = String::new();
            for c in &path.commands {
                match c {
                    Command::Move { xyz_mm: [x, y, z] } => {
                        writeln!(out, "MOVE {x:.3} {y:.3} {z:.3} {v:.3} {a:.3}").unwrap()
                    }
                    Command::Grip => out.push_str("GRIP\n"),
                    Command::Release => out.push_str("RELEASE\n"),
                }
            }
            out.into_bytes()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::sequence::connectivity_sort;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn row(n: i32) -> (OccupancyGrid, AssemblySequence) {
        let spec = GridSpec::new([0.0; 3], 10.0, [6, 5, 6]).unwrap();
        let cells: Vec<Cell> = (0..n).map(|t| Cell::new(t % 6, (t / 6) % 5, t / 30)).collect();
        let grid = OccupancyGrid::from_cells(spec, cells).unwrap();
        let seq = connectivity_sort(&grid).unwrap();
        (grid, seq)
    }

    fn path_of(moves: &[[f64; 3]], params: MotionParams) -> Toolpath {
        Toolpath {
            params,
            commands: moves.iter().map(|&xyz_mm| Command::Move { xyz_mm }).collect(),
        }
    }

    fn unit() -> MotionParams {
        MotionParams::new(1.0, Ratio::OneToOne).unwrap()
    }

    #[test]
    fn one_cell_cycle() {
        let (g, s) = row(1);
        let cfg = AssemblyConfig::default();
        let p = plan_toolpath(&s, &g, &cfg, MotionParams::default()).unwrap();
        assert_eq!(p.commands.len(), 9);
        assert_eq!(p.commands[3], Command::Grip);
        assert_eq!(p.commands[7], Command::Release);
        assert_eq!(
            p.commands[0],
            Command::Move {
                xyz_mm: [-200.0, 250.0, 700.0]
            }
        );
        assert_eq!(
            p.commands[2],
            Command::Move {
                xyz_mm: [-200.0, 250.0, 100.0]
            }
        );
        // cell (0,0,0): centre (5, 5), bottom 0, tool one cell above
        assert_eq!(
            p.commands[6],
            Command::Move {
                xyz_mm: [50.0, 50.0, 100.0]
            }
        );
        assert_eq!(
            p.commands[8],
            Command::Move {
                xyz_mm: [50.0, 50.0, 700.0]
            }
        );
    }

    #[test]
    fn forty_cells() {
        let (g, s) = row(40);
        let p = plan_toolpath(&s, &g, &AssemblyConfig::default(), MotionParams::default()).unwrap();
        assert_eq!(p.commands.len(), 321);
    }

    #[test]
    fn empty_sequence_rejected() {
        let spec = GridSpec::new([0.0; 3], 10.0, [1, 1, 1]).unwrap();
        let g = OccupancyGrid::empty(spec);
        let s = AssemblySequence { cells: vec![] };
        assert_eq!(
            plan_toolpath(&s, &g, &AssemblyConfig::default(), MotionParams::default()),
            Err(ToolpathError::EmptyAssembly)
        );
    }

    #[test]
    fn config_violations() {
        let (g, s) = row(3);
        let low = AssemblyConfig {
            movement_plane_z: 50.0,
            ..Default::default()
        };
        assert!(matches!(
            plan_toolpath(&s, &g, &low, MotionParams::default()),
            Err(ToolpathError::ConfigViolation(_))
        ));
        let over = AssemblyConfig {
            source: [20.0, 20.0, 10.0],
            ..Default::default()
        };
        assert!(matches!(
            plan_toolpath(&s, &g, &over, MotionParams::default()),
            Err(ToolpathError::ConfigViolation(_))
        ));
    }

    #[test]
    fn segment_closed_forms() {
        let t = estimate_duration_with_dwell(&path_of(&[[0.0; 3], [10.0, 0.0, 0.0]], unit()), 0.0);
        assert_relative_eq!(t, 11.0, epsilon = 1e-12);
        let t = estimate_duration(&path_of(&[[0.0; 3], [0.5, 0.0, 0.0]], unit()));
        assert_relative_eq!(t, 2.0 * 0.5f64.sqrt(), epsilon = 1e-12);
        assert_eq!(format!("{t:.4}"), "1.4142");
        let t = estimate_duration(&path_of(&[[1.0; 3], [1.0; 3]], unit()));
        assert_eq!(t, 0.0);
    }

    #[test]
    fn dwell_and_units() {
        let (g, s) = row(1);
        let p = plan_toolpath(&s, &g, &AssemblyConfig::default(), MotionParams::default()).unwrap();
        let with = estimate_duration(&p);
        let without = estimate_duration_with_dwell(&p, 0.0);
        assert_relative_eq!(with - without, 1.0, epsilon = 1e-9);
        let metres = Toolpath {
            params: MotionParams::with_units(2.0, Ratio::TwoToOne, SpeedUnit::M).unwrap(),
            ..p.clone()
        };
        assert!(estimate_duration(&metres) < with / 100.0);
    }

    #[test]
    fn schedule_matches_sweep() {
        let s = calibration_schedule(1.0, 0.5, 2.5).unwrap();
        let v: Vec<f64> = s.iter().map(|p| p.velocity).collect();
        let a: Vec<f64> = s.iter().map(|p| p.acceleration).collect();
        assert_eq!(v, vec![1.0, 1.0, 1.5, 1.5, 2.0, 2.0, 2.5, 2.5]);
        assert_eq!(a, vec![1.0, 0.5, 1.5, 0.75, 2.0, 1.0, 2.5, 1.25]);
        assert_eq!(calibration_schedule(1.0, 0.5, 1.0).unwrap().len(), 2);
        assert!(s.iter().any(|p| p.velocity == 2.0 && p.acceleration == 1.0));
        assert!(calibration_schedule(2.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn script_grammar() {
        let (g, s) = row(1);
        let p = plan_toolpath(&s, &g, &AssemblyConfig::default(), MotionParams::default()).unwrap();
        let text = String::from_utf8(emit_toolpath(&p, ToolpathFormat::RobotScript)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 9);
        assert!(text.ends_with('\n'));
        assert_eq!(lines[0], "MOVE -200.000 250.000 700.000 2.000 1.000");
        assert_eq!(lines[3], "GRIP");
        assert_eq!(lines[7], "RELEASE");
    }

    #[test]
    fn json_round_trip() {
        let (g, s) = row(5);
        let p = plan_toolpath(&s, &g, &AssemblyConfig::default(), MotionParams::default()).unwrap();
        let bytes = emit_toolpath(&p, ToolpathFormat::Json);
        let back = Toolpath::from_json(std::str::from_utf8(&bytes).unwrap()).unwrap();
        assert_eq!(back, p);
        let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(v["params"]["velocity"], 2.0);
        assert_eq!(v["commands"][3]["op"], "grip");
        assert_eq!(v["commands"][0]["op"], "move");
        let bad = r#"{"params":{"velocity":2.0,"acceleration":0.3},"commands":[]}"#;
        assert!(Toolpath::from_json(bad).is_err());
    }

    proptest! {
        #[test]
        fn command_law_and_vertical_descents(n in 1i32..60) {
            let (g, s) = row(n);
            let cfg = AssemblyConfig::default();
            let p = plan_toolpath(&s, &g, &cfg, MotionParams::default()).unwrap();
            prop_assert_eq!(p.commands.len(), 1 + 8 * n as usize);
            let plane = cfg.movement_plane_z * 10.0;
            let moves: Vec<[f64; 3]> = p.moves().collect();
            for w in moves.windows(2) {
                let (a, b) = (w[0], w[1]);
                let horizontal = a[0] != b[0] || a[1] != b[1];
                if horizontal {
                    prop_assert_eq!(a[2], plane);
                    prop_assert_eq!(b[2], plane);
                }
            }
            for (i, c) in p.commands.iter().enumerate() {
                if matches!(c, Command::Grip | Command::Release) {
                    let Command::Move { xyz_mm } = p.commands[i - 1] else { panic!() };
                    prop_assert!(xyz_mm[2] < plane);
                }
            }
        }

        #[test]
        fn faster_is_never_slower(n in 1i32..20, v in 0.5f64..50.0, dv in 0.01f64..10.0) {
            let (g, s) = row(n);
            let cfg = AssemblyConfig::default();
            let slow = plan_toolpath(&s, &g, &cfg, MotionParams::new(v, Ratio::TwoToOne).unwrap()).unwrap();
            let mut fast = slow.clone();
            fast.params.velocity = v + dv;
            let (ts, tf) = (estimate_duration(&slow), estimate_duration(&fast));
            prop_assert!(tf <= ts + 1e-9);
            // any move long enough to cruise at the higher speed makes it strict
            let a = slow.params.acceleration;
            let cruising = slow.moves().collect::<Vec<_>>().windows(2).any(|w| {
                let d = (0..3).map(|k| (w[1][k] - w[0][k]).powi(2)).sum::<f64>().sqrt();
                d > (v + dv) * (v + dv) / a
            });
            if cruising {
                prop_assert!(tf < ts);
            }
        }
    }
}
