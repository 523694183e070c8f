use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use discrete_assembly::feasibility::FeasibilityError;
use discrete_assembly::frontend::{FilterOutcome, FrontendError};
use discrete_assembly::mesh::{format_from_path, parse_mesh};
use discrete_assembly::pipeline::{self, artifact, PipelineConfig, PipelineError, PreparedMesh};
use discrete_assembly::sequence::{AssemblySequence, SequenceError};
use discrete_assembly::toolpath::{emit_toolpath, ToolpathError, ToolpathFormat};
use discrete_assembly::{MeshError, OccupancyGrid, TriangleMesh};

mod exit {
    pub const REJECTED: u8 = 3;
    pub const MALFORMED_FILE: u8 = 4;
    pub const UNSUPPORTED_FORMAT: u8 = 5;
    pub const EMPTY_MESH: u8 = 6;
    pub const CANNOT_FIT: u8 = 7;
    pub const EMPTY_AFTER_MODIFICATION: u8 = 8;
    pub const UNSEQUENCEABLE: u8 = 9;
    pub const CONFIG_VIOLATION: u8 = 10;
    pub const VALIDATION_FAILED: u8 = 11;
    pub const CLIENT_UNAVAILABLE: u8 = 12;
    pub const SCHEMA_MISMATCH: u8 = 13;
    pub const IO: u8 = 14;
    pub const CONFIG: u8 = 15;
    pub const EMPTY_ASSEMBLY: u8 = 16;
    pub const MESH_REQUIRED: u8 = 17;
}

/// Turn a request or a mesh into a checked, sequenced pick-and-place program.
#[derive(Parser)]
#[command(name = "discrete-assembly", version)]
struct Cli {
    /// JSON configuration file; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one setting, e.g. `--set assembly.inventory=30`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage and write grid, report, sequence, toolpath and summary.
    Pipeline(PipelineArgs),
    /// Decide whether a request names a physical object.
    Filter {
        /// Request text; `-` reads standard input.
        #[arg(long)]
        text: String,
    },
    /// Repair, fit and voxelize a mesh into the first-pass grid.
    Voxelize {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the feasibility checks on a grid and repair what fails.
    Check {
        #[arg(long)]
        grid: PathBuf,
        /// Source mesh, needed when the component count must be reduced.
        #[arg(long)]
        mesh: Option<PathBuf>,
        /// Report destination.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to write the grid after repairs.
        #[arg(long)]
        grid_out: Option<PathBuf>,
        #[arg(long)]
        no_failure_handling: bool,
    },
    /// Order the occupied cells for bottom-up assembly.
    Sequence {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Plain layer/x/y order without the connectivity search.
        #[arg(long)]
        naive: bool,
    },
    /// Plan the robot program for a sequence.
    Toolpath {
        #[arg(long)]
        sequence: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, default_value = "json")]
        format: ToolpathFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay a sequence and report the first unsafe placement.
    Validate {
        #[arg(long)]
        sequence: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long, conflicts_with = "text", required_unless_present = "text")]
    mesh: Option<PathBuf>,
    /// Request text; `-` reads standard input.
    #[arg(long)]
    text: Option<String>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long)]
    no_failure_handling: bool,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

fn mesh_code(e: &MeshError) -> u8 {
    match e {
        MeshError::MalformedFile(_) => exit::MALFORMED_FILE,
        MeshError::UnsupportedFormat(_) => exit::UNSUPPORTED_FORMAT,
        MeshError::EmptyMesh => exit::EMPTY_MESH,
    }
}

fn sequence_code(e: &SequenceError) -> u8 {
    match e {
        SequenceError::SequenceGridMismatch(_) => exit::SCHEMA_MISMATCH,
        SequenceError::Unsequenceable(_) => exit::UNSEQUENCEABLE,
        SequenceError::EmptyAssembly => exit::EMPTY_ASSEMBLY,
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let code = match &e {
            PipelineError::Rejected(_) => exit::REJECTED,
            PipelineError::Frontend(FrontendError::Mesh(m)) | PipelineError::Mesh(m) => mesh_code(m),
            PipelineError::Frontend(FrontendError::ClientUnavailable(_)) => exit::CLIENT_UNAVAILABLE,
            PipelineError::Frontend(FrontendError::EmptyInput) => exit::REJECTED,
            PipelineError::Feasibility(f) => match f {
                FeasibilityError::EmptyAssembly => exit::EMPTY_ASSEMBLY,
                FeasibilityError::CannotFit { .. } => exit::CANNOT_FIT,
                FeasibilityError::EmptyAfterModification => exit::EMPTY_AFTER_MODIFICATION,
                FeasibilityError::MeshRequired => exit::MESH_REQUIRED,
                FeasibilityError::Mesh(m) => mesh_code(m),
                FeasibilityError::Sequence(s) => sequence_code(s),
            },
            PipelineError::Sequence(s) => sequence_code(s),
            PipelineError::Toolpath(t) => match t {
                ToolpathError::Sequence(s) => sequence_code(s),
                ToolpathError::EmptyAssembly => exit::EMPTY_ASSEMBLY,
                ToolpathError::ConfigViolation(_) | ToolpathError::InvalidParams(_) => exit::CONFIG_VIOLATION,
            },
            PipelineError::Config(_) => exit::CONFIG,
        };
        Failure::new(code, e.to_string())
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::new(exit::IO, format!("{}: {e}", path.display()))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| io_failure(path, e))
}

fn read_json<T>(path: &Path, what: &str, parse: fn(&str) -> serde_json::Result<T>) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    parse(&text).map_err(|e| {
        Failure::new(
            exit::SCHEMA_MISMATCH,
            format!("{} is not a valid {what}: {e}", path.display()),
        )
    })
}

fn write_out(out: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| io_failure(path, e)),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| Failure::new(exit::IO, e.to_string())),
    }
}

fn read_text(arg: &str) -> Result<String, Failure> {
    if arg != "-" {
        return Ok(arg.to_string());
    }
    let mut s = String::new();
    std::io::stdin()
        .read_to_string(&mut s)
        .map_err(|e| Failure::new(exit::IO, e.to_string()))?;
    Ok(s.trim().to_string())
}

fn load_mesh(path: &Path) -> Result<TriangleMesh, Failure> {
    let bytes = read_bytes(path)?;
    parse_mesh(&bytes, format_from_path(path)).map_err(|e| Failure::from(PipelineError::Mesh(e)))
}

fn prepare(path: &Path, cfg: &PipelineConfig) -> Result<PreparedMesh, Failure> {
    Ok(pipeline::prepare_mesh(&load_mesh(path)?, cfg)?)
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
            PipelineConfig::from_json(&text)?
        }
        None => PipelineConfig::default(),
    };
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::new(exit::CONFIG, format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Pipeline(args) => {
            let handling = !args.no_failure_handling;
            let run = match (&args.mesh, &args.text) {
                (Some(mesh), _) => pipeline::run_from_mesh(&load_mesh(mesh)?, &cfg, handling)?,
                (None, Some(text)) => pipeline::run_from_text(&read_text(text)?, &cfg, handling)?,
                (None, None) => unreachable!("clap requires one input"),
            };
            run.write_artifacts(&args.out_dir)
                .map_err(|e| io_failure(&args.out_dir, e))?;
            print!("{}", run.summary());
            if !run.simulation.ok {
                return Err(Failure::new(exit::VALIDATION_FAILED, "assembly validation failed"));
            }
        }
        Command::Filter { text } => {
            let outcome = pipeline::filter_stage(&read_text(&text)?, &cfg)?;
            let json = serde_json::to_string(&outcome).expect("outcome serialization cannot fail");
            write_out(None, &artifact(json))?;
            if let FilterOutcome::Rejected(r) = outcome {
                return Err(Failure::new(exit::REJECTED, r.message));
            }
        }
        Command::Voxelize { mesh, out } => {
            let prepared = prepare(&mesh, &cfg)?;
            let grid = pipeline::voxelize_stage(&prepared, &cfg)?;
            write_out(out.as_deref(), &artifact(grid.to_json()))?;
        }
        Command::Check {
            grid,
            mesh,
            out,
            grid_out,
            no_failure_handling,
        } => {
            let first = read_json(&grid, "grid", OccupancyGrid::from_json)?;
            let prepared = mesh.as_deref().map(|m| prepare(m, &cfg)).transpose()?;
            let (final_grid, report) = pipeline::check_stage(&first, prepared.as_ref(), &cfg, !no_failure_handling)?;
            if let Some(path) = grid_out {
                write_out(Some(&path), &artifact(final_grid.to_json()))?;
            }
            write_out(out.as_deref(), &artifact(report.to_json()))?;
        }
        Command::Sequence { grid, out, naive } => {
            let grid = read_json(&grid, "grid", OccupancyGrid::from_json)?;
            let seq = pipeline::sequence_stage(&grid, naive)?;
            write_out(out.as_deref(), &artifact(seq.to_json()))?;
        }
        Command::Toolpath {
            sequence,
            grid,
            format,
            out,
        } => {
            let seq = read_json(&sequence, "sequence", AssemblySequence::from_json)?;
            let grid = read_json(&grid, "grid", OccupancyGrid::from_json)?;
            let path = pipeline::toolpath_stage(&seq, &grid, &cfg)?;
            let bytes = match format {
                ToolpathFormat::Json => artifact(path.to_json()),
                ToolpathFormat::RobotScript => emit_toolpath(&path, format),
            };
            write_out(out.as_deref(), &bytes)?;
        }
        Command::Validate { sequence, grid, out } => {
            let seq = read_json(&sequence, "sequence", AssemblySequence::from_json)?;
            let grid = read_json(&grid, "grid", OccupancyGrid::from_json)?;
            let report = pipeline::validate_stage(&seq, &grid, &cfg)?;
            write_out(out.as_deref(), &artifact(report.to_json()))?;
            if let Some(i) = report.first_failure {
                let step = &report.steps[i];
                return Err(Failure::new(
                    exit::VALIDATION_FAILED,
                    format!(
                        "step {i} places {}: supported {}, corridor clear {}, plane clear {}",
                        step.cell, step.supported, step.corridor_clear, step.plane_clear
                    ),
                ));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
