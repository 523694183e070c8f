//! End-to-end orchestration and its configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::config::AssemblyConfig;
use crate::discretize::{discretize, fit_to_workspace, VoxelizeOptions};
use crate::feasibility::{
    run_feasibility_on_grid, CheckKind, FeasibilityError, FeasibilityOptions, FeasibilityReport, Modification,
};
use crate::frontend::{
    acquire_mesh, fallback_filter_with, FilterOutcome, FrontendError, GuidedPrompt, MeshGeneratorClient,
    MockMeshClient, ObjectRequest, Rejection, DEFAULT_ABSTRACT_LEXICON,
};
use crate::grid::OccupancyGrid;
use crate::mesh::{repair_mesh, MeshError, RepairSummary, TriangleMesh, DEFAULT_WELD_TOLERANCE};
use crate::sequence::{connectivity_sort, naive_sort, AssemblySequence, SequenceError};
use crate::toolpath::{estimate_duration, plan_toolpath, MotionParams, Ratio, SpeedUnit, Toolpath, ToolpathError};
use crate::validate::{simulate_assembly, SimulationReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("{}", .0.message)]
    Rejected(Rejection),
    #[error(transparent)]
    Frontend(FrontendError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Feasibility(#[from] FeasibilityError),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error(transparent)]
    Toolpath(#[from] ToolpathError),
    #[error("configuration: {0}")]
    Config(String),
}

impl From<FrontendError> for PipelineError {
    fn from(e: FrontendError) -> Self {
        match e {
            FrontendError::Mesh(m) => PipelineError::Mesh(m),
            other => PipelineError::Frontend(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterBackend {
    /// Deterministic rule-based filter, no network.
    #[default]
    Offline,
    /// Language model only.
    Llm,
    /// Language model, falling back to the offline filter when unreachable.
    LlmWithFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub backend: FilterBackend,
    pub prompt: GuidedPrompt,
    pub abstract_lexicon: Vec<String>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            backend: FilterBackend::default(),
            prompt: GuidedPrompt::default(),
            abstract_lexicon: DEFAULT_ABSTRACT_LEXICON.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorBackend {
    /// Phrase-to-file manifest on disk.
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub backend: GeneratorBackend,
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub weld_tolerance_cm: f64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            weld_tolerance_cm: DEFAULT_WELD_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionConfig {
    pub velocity: f64,
    pub ratio: Ratio,
    pub units: SpeedUnit,
}

impl Default for MotionConfig {
    fn default() -> Self {
        let p = MotionParams::default();
        Self {
            velocity: p.velocity,
            ratio: p.ratio,
            units: p.units,
        }
    }
}

impl MotionConfig {
    pub fn params(&self) -> Result<MotionParams, ToolpathError> {
        MotionParams::with_units(self.velocity, self.ratio, self.units)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub assembly: AssemblyConfig,
    pub motion: MotionConfig,
    pub mesh: MeshConfig,
    pub filter: FilterConfig,
    pub generator: GeneratorConfig,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.assembly
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        self.motion.params().map_err(|e| PipelineError::Config(e.to_string()))?;
        if !(self.mesh.weld_tolerance_cm >= 0.0) {
            return Err(PipelineError::Config(
                "mesh.weld_tolerance_cm must be non-negative".into(),
            ));
        }
        if self.filter.prompt.instruction.trim().is_empty() {
            return Err(PipelineError::Config(
                "filter.prompt.instruction must not be empty".into(),
            ));
        }
        Ok(())
    }

    /// Sets a dotted key such as `assembly.inventory` or `motion.velocity`.
    /// The value is read as JSON when it parses, otherwise as a string.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), PipelineError> {
        let mut tree = serde_json::to_value(&*self).expect("config serialization cannot fail");
        let mut node = &mut tree;
        for part in key.split('.') {
            node = node
                .as_object_mut()
                .and_then(|m| m.get_mut(part))
                .ok_or_else(|| PipelineError::Config(format!("unknown setting {key:?}")))?;
        }
        *node = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
        let next: Self = serde_json::from_value(tree).map_err(|e| PipelineError::Config(format!("{key}: {e}")))?;
        next.validate()?;
        *self = next;
        Ok(())
    }
}

/// Mesh after repair and fitting, ready to voxelize.
#[derive(Debug, Clone)]
pub struct PreparedMesh {
    pub mesh: TriangleMesh,
    pub repair: RepairSummary,
    pub fit_scale: f64,
}

impl PreparedMesh {
    /// Interior filling is only trusted on closed, consistently wound meshes.
    pub fn voxelize_options(&self) -> VoxelizeOptions {
        VoxelizeOptions::for_manifold(self.repair.manifold)
    }
}

pub fn prepare_mesh(raw: &TriangleMesh, cfg: &PipelineConfig) -> Result<PreparedMesh, PipelineError> {
    let (repaired, repair) = repair_mesh(raw, cfg.mesh.weld_tolerance_cm);
    if repaired.is_empty() {
        return Err(MeshError::EmptyMesh.into());
    }
    let (mesh, fit_scale) = fit_to_workspace(&repaired, &cfg.assembly.workspace, cfg.assembly.max_scale())?;
    Ok(PreparedMesh {
        mesh,
        repair,
        fit_scale,
    })
}

/// First-pass grid, before any check.
pub fn voxelize_stage(prepared: &PreparedMesh, cfg: &PipelineConfig) -> Result<OccupancyGrid, PipelineError> {
    Ok(discretize(
        &prepared.mesh,
        cfg.assembly.cell_size,
        prepared.voxelize_options(),
    )?)
}

pub fn check_stage(
    first: &OccupancyGrid,
    prepared: Option<&PreparedMesh>,
    cfg: &PipelineConfig,
    failure_handling: bool,
) -> Result<(OccupancyGrid, FeasibilityReport), PipelineError> {
    let options = FeasibilityOptions {
        failure_handling,
        voxelize: prepared
            .map(PreparedMesh::voxelize_options)
            .unwrap_or(VoxelizeOptions::for_manifold(true)),
    };
    Ok(run_feasibility_on_grid(
        first,
        prepared.map(|p| &p.mesh),
        &cfg.assembly,
        options,
    )?)
}

pub fn sequence_stage(grid: &OccupancyGrid, naive: bool) -> Result<AssemblySequence, PipelineError> {
    if grid.is_empty() {
        return Err(SequenceError::EmptyAssembly.into());
    }
    Ok(if naive {
        naive_sort(grid)
    } else {
        connectivity_sort(grid)?
    })
}

pub fn toolpath_stage(
    seq: &AssemblySequence,
    grid: &OccupancyGrid,
    cfg: &PipelineConfig,
) -> Result<Toolpath, PipelineError> {
    Ok(plan_toolpath(seq, grid, &cfg.assembly, cfg.motion.params()?)?)
}

pub fn validate_stage(
    seq: &AssemblySequence,
    grid: &OccupancyGrid,
    cfg: &PipelineConfig,
) -> Result<SimulationReport, PipelineError> {
    Ok(simulate_assembly(seq, grid, &cfg.assembly)?)
}

pub fn filter_stage(text: &str, cfg: &PipelineConfig) -> Result<FilterOutcome, PipelineError> {
    let offline = || fallback_filter_with(text, &cfg.filter.abstract_lexicon);
    match cfg.filter.backend {
        FilterBackend::Offline => Ok(offline()),
        FilterBackend::Llm => Ok(filter_with_llm(text, cfg)?),
        FilterBackend::LlmWithFallback => match filter_with_llm(text, cfg) {
            Err(FrontendError::ClientUnavailable(_)) => Ok(offline()),
            other => Ok(other?),
        },
    }
}

#[cfg(feature = "http")]
fn filter_with_llm(text: &str, cfg: &PipelineConfig) -> Result<FilterOutcome, FrontendError> {
    let client = crate::frontend::ChatCompletionClient::from_env(crate::frontend::UreqTransport)?;
    crate::frontend::filter_request(text, &client, &cfg.filter.prompt)
}

#[cfg(not(feature = "http"))]
fn filter_with_llm(_: &str, _: &PipelineConfig) -> Result<FilterOutcome, FrontendError> {
    Err(FrontendError::ClientUnavailable("built without HTTP support".into()))
}

pub fn mesh_client(cfg: &PipelineConfig) -> Result<Box<dyn MeshGeneratorClient>, PipelineError> {
    match cfg.generator.backend {
        GeneratorBackend::Mock => {
            let manifest = cfg.generator.manifest.as_deref().ok_or_else(|| {
                PipelineError::Frontend(FrontendError::ClientUnavailable(
                    "no mesh generator configured (set generator.manifest)".into(),
                ))
            })?;
            Ok(Box::new(MockMeshClient::from_manifest(manifest)?))
        }
        #[cfg(feature = "http")]
        GeneratorBackend::Http => Ok(Box::new(crate::frontend::HttpMeshClient::from_env(
            crate::frontend::UreqTransport,
        )?)),
        #[cfg(not(feature = "http"))]
        GeneratorBackend::Http => Err(PipelineError::Frontend(FrontendError::ClientUnavailable(
            "built without HTTP support".into(),
        ))),
    }
}

/// Everything one run produces.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub request: Option<ObjectRequest>,
    pub prepared: PreparedMesh,
    pub grid: OccupancyGrid,
    pub report: FeasibilityReport,
    pub sequence: AssemblySequence,
    pub toolpath: Toolpath,
    pub simulation: SimulationReport,
}

pub fn run_from_mesh(
    raw: &TriangleMesh,
    cfg: &PipelineConfig,
    failure_handling: bool,
) -> Result<PipelineRun, PipelineError> {
    cfg.validate()?;
    let prepared = prepare_mesh(raw, cfg)?;
    let first = voxelize_stage(&prepared, cfg)?;
    let (grid, report) = check_stage(&first, Some(&prepared), cfg, failure_handling)?;
    let sequence = sequence_stage(&grid, !failure_handling)?;
    let toolpath = toolpath_stage(&sequence, &grid, cfg)?;
    let simulation = validate_stage(&sequence, &grid, cfg)?;
    Ok(PipelineRun {
        request: None,
        prepared,
        grid,
        report,
        sequence,
        toolpath,
        simulation,
    })
}

pub fn run_from_text(text: &str, cfg: &PipelineConfig, failure_handling: bool) -> Result<PipelineRun, PipelineError> {
    cfg.validate()?;
    let request = match filter_stage(text, cfg)? {
        FilterOutcome::Object(r) => r,
        FilterOutcome::Rejected(r) => return Err(PipelineError::Rejected(r)),
    };
    let client = mesh_client(cfg)?;
    let raw = acquire_mesh(&request, client.as_ref())?;
    let mut run = run_from_mesh(&raw, cfg, failure_handling)?;
    run.request = Some(request);
    Ok(run)
}

/// JSON artifact bytes as written to disk.
pub fn artifact(json: String) -> Vec<u8> {
    let mut bytes = json.into_bytes();
    bytes.push(b'\n');
    bytes
}

pub const ARTIFACT_NAMES: [&str; 5] = [
    "grid.json",
    "report.json",
    "sequence.json",
    "toolpath.json",
    "summary.txt",
];

impl PipelineRun {
    pub fn artifacts(&self) -> Vec<(&'static str, Vec<u8>)> {
        vec![
            (ARTIFACT_NAMES[0], artifact(self.grid.to_json())),
            (ARTIFACT_NAMES[1], artifact(self.report.to_json())),
            (ARTIFACT_NAMES[2], artifact(self.sequence.to_json())),
            (ARTIFACT_NAMES[3], artifact(self.toolpath.to_json())),
            (ARTIFACT_NAMES[4], self.summary().into_bytes()),
        ]
    }

    pub fn write_artifacts(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, bytes) in self.artifacts() {
            std::fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        if let Some(r) = &self.request {
            writeln!(s, "request: {:?} -> {:?}", r.raw_text, r.extracted_phrase).unwrap();
        }
        let rep = &self.prepared.repair;
        writeln!(
            s,
            "mesh: {} vertices, {} triangles; welded {}, dropped {} degenerate and {} duplicate, flipped {}; {}",
            self.prepared.mesh.vertices.len(),
            self.prepared.mesh.triangles.len(),
            rep.welded_vertices,
            rep.removed_degenerate,
            rep.removed_duplicate,
            rep.flipped_triangles,
            if rep.manifold { "closed" } else { "open or non-manifold" }
        )
        .unwrap();
        writeln!(s, "fit scale: {:.6}", self.prepared.fit_scale).unwrap();
        let d = self.grid.spec.dims;
        writeln!(
            s,
            "grid: {} x {} x {} cells of {} cm",
            d[0], d[1], d[2], self.grid.spec.cell_size
        )
        .unwrap();
        writeln!(s, "checks (first pass -> final):").unwrap();
        for kind in CheckKind::ALL {
            let status = |r: &crate::feasibility::CheckResult| if r.passed() { "passed" } else { "failed" };
            writeln!(
                s,
                "  {:<16} {} -> {}",
                kind.label(),
                status(self.report.result(kind)),
                status(self.report.final_result(kind))
            )
            .unwrap();
        }
        if self.report.modifications.is_empty() {
            writeln!(s, "modifications: none").unwrap();
        }
        for m in &self.report.modifications {
            let line = match m {
                Modification::Rescale {
                    iterations,
                    scale,
                    component_count,
                } => format!("rescaled {iterations} times to {scale:.6}, {component_count} components"),
                Modification::RemoveOverhangs { removed } => format!("removed {} overhanging cells", removed.len()),
                Modification::TruncateStacks { removed } => format!("removed {} cells from tall stacks", removed.len()),
                Modification::ConnectivitySort => "reordered placements for connectivity".to_string(),
            };
            writeln!(s, "modification: {line}").unwrap();
        }
        writeln!(s, "components: {}", self.report.final_component_count).unwrap();
        writeln!(s, "toolpath: {} commands", self.toolpath.commands.len()).unwrap();
        let p = &self.toolpath.params;
        writeln!(
            s,
            "motion: velocity {} acceleration {} ({:?} units); estimated {:.1} s",
            p.velocity,
            p.acceleration,
            p.units,
            estimate_duration(&self.toolpath)
        )
        .unwrap();
        match self.simulation.first_failure {
            None => writeln!(s, "validation: ok").unwrap(),
            Some(i) => {
                let step = &self.simulation.steps[i];
                writeln!(
                    s,
                    "validation: failed at step {i} {} (supported {}, corridor clear {}, plane clear {})",
                    step.cell, step.supported, step.corridor_clear, step.plane_clear
                )
                .unwrap()
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasibility::CheckStatus;
    use crate::fixtures;
    use crate::validate::verify_report_consistency;

    #[test]
    fn defaults_round_trip() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        assert_eq!(PipelineConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        assert_eq!(PipelineConfig::from_json("{}").unwrap(), cfg);
        assert_eq!(cfg.assembly.workspace.extent, [60.0, 50.0, 60.0]);
        assert_eq!(cfg.motion.params().unwrap().acceleration, 1.0);
    }

    #[test]
    fn dotted_overrides() {
        let mut cfg = PipelineConfig::default();
        cfg.set("assembly.inventory", "12").unwrap();
        cfg.set("motion.ratio", "one_to_one").unwrap();
        cfg.set("assembly.workspace_cm", "[80, 50, 60]").unwrap();
        cfg.set("generator.manifest", "meshes/manifest.json").unwrap();
        assert_eq!(cfg.assembly.inventory.available_components, 12);
        assert_eq!(cfg.motion.ratio, Ratio::OneToOne);
        assert_eq!(cfg.assembly.workspace.extent[0], 80.0);
        assert_eq!(
            cfg.generator.manifest.as_deref(),
            Some(Path::new("meshes/manifest.json"))
        );
        assert!(cfg.set("assembly.nope", "1").is_err());
        assert!(cfg.set("assembly.inventory", "0").is_err());
        assert!(cfg.set("assembly.movement_plane_z_cm", "30").is_err());
        assert_eq!(cfg.assembly.inventory.available_components, 12);
    }

    #[test]
    fn table_end_to_end() {
        let cfg = PipelineConfig::default();
        let run = run_from_mesh(&fixtures::table(), &cfg, true).unwrap();
        assert!(run.simulation.ok);
        assert_eq!(run.report.status(CheckKind::Connectivity), CheckStatus::Failed);
        assert!(run.report.all_final_passed());
        assert!(verify_report_consistency(&run.report, &run.grid, &cfg.assembly));
        assert_eq!(run.toolpath.commands.len(), 1 + 8 * 33);
        assert_eq!(run.artifacts().len(), 5);
        assert!(run.summary().contains("validation: ok"));
    }

    #[test]
    fn raw_table_stalls() {
        let run = run_from_mesh(&fixtures::table(), &PipelineConfig::default(), false).unwrap();
        assert!(run.report.modifications.is_empty());
        assert!(!run.simulation.ok);
        assert!(run.summary().contains("validation: failed at step"));
    }

    #[test]
    fn rejected_text() {
        let err = run_from_text("Knowledge", &PipelineConfig::default(), true).unwrap_err();
        assert!(matches!(err, PipelineError::Rejected(_)));
        assert!(err.to_string().contains("restate"));
        let err = run_from_text("make me a stool", &PipelineConfig::default(), true).unwrap_err();
        assert!(matches!(
            err,
            PipelineError::Frontend(FrontendError::ClientUnavailable(_))
        ));
    }
}
