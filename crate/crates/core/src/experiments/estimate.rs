//! Single-surface runs: one spectrum, or conformal suprema for a list of `k`.

use serde::{Deserialize, Serialize};

use super::{dump, unix_now, ExperimentRun, RunRecord, Shape};
use crate::error::{Error, Result};
use crate::fem::{assemble_boundary_mass, assemble_stiffness, BoundaryDensity};
use crate::mesh::{off, BoundaryPartition, SurfaceMesh};
use crate::optimize::{maximize_on_problem, refined_sigma_bar, OptimizerOptions};
use crate::spectrum::{SolverOptions, SpectralProblem};

fn default_shape() -> Shape {
    Shape::Disc
}
fn default_refinement() -> u32 {
    3
}
fn default_k_max() -> usize {
    6
}
fn default_k_list() -> Vec<usize> {
    vec![1]
}
fn default_levels() -> usize {
    2
}

/// A mesh given either by a model shape or by files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSource {
    #[serde(default = "default_shape")]
    pub shape: Shape,
    #[serde(default = "default_refinement")]
    pub refinement: u32,
    /// OFF file replacing `shape`; the whole boundary is Steklov unless a
    /// density dump says otherwise.
    #[serde(default)]
    pub mesh_file: Option<String>,
    /// Density dump (`*.off-density`) for `mesh_file` or the built shape.
    #[serde(default)]
    pub density_file: Option<String>,
}

impl Default for SurfaceSource {
    fn default() -> Self {
        Self { shape: default_shape(), refinement: default_refinement(), mesh_file: None, density_file: None }
    }
}

impl SurfaceSource {
    pub fn name(&self) -> String {
        match &self.mesh_file {
            Some(_) => "mesh".into(),
            None => self.shape.name(),
        }
    }

    pub fn load(&self) -> Result<(SurfaceMesh, BoundaryPartition, Option<BoundaryDensity>)> {
        let (mesh, partition) = match &self.mesh_file {
            Some(path) => {
                let mesh = off::read_off(path)?;
                let partition = BoundaryPartition::all_steklov(&mesh);
                (mesh, partition)
            }
            None => self.shape.build(self.refinement)?,
        };
        match &self.density_file {
            Some(path) => {
                let (partition, density) = dump::read_density_dump(&mesh, &std::fs::read_to_string(path)?)?;
                Ok((mesh, partition, Some(density)))
            }
            None => Ok((mesh, partition, None)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumConfig {
    #[serde(flatten)]
    pub surface: SurfaceSource,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    /// Also write the stiffness and boundary mass in Matrix Market format.
    #[serde(default)]
    pub export_matrices: bool,
    #[serde(default)]
    pub solver: SolverOptions,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { surface: SurfaceSource::default(), k_max: default_k_max(), export_matrices: false, solver: SolverOptions::default() }
    }
}

/// Spectrum at the given (or unit) density, compared with the closed form
/// when the shape has one.
pub fn run_spectrum(config: &SpectrumConfig) -> Result<ExperimentRun> {
    let mut run = ExperimentRun::new("spectrum", serde_json::to_value(config)?);
    let (mesh, partition, density) = config.surface.load()?;
    let problem = SpectralProblem::new(mesh.clone(), partition.clone(), config.solver)?;
    let density = density.unwrap_or_else(|| problem.uniform_density());
    let spectrum = problem.solve(&density, config.k_max)?;
    let oracle = match (&config.surface.mesh_file, &config.surface.density_file) {
        (None, None) => config.surface.shape.oracle(),
        _ => None,
    };
    let name = config.surface.name();
    let file = format!("spectra/{name}.csv");
    run.push_artifact(file.clone(), spectrum.to_csv());
    run.push_artifact(format!("densities/{name}.off-density"), dump::write_density_dump(&mesh, &partition, &density));
    for k in 1..=config.k_max {
        run.records.push(RunRecord {
            label: "sigma".into(),
            parameter: 0.0,
            k,
            value: spectrum.sigma(k),
            reference: oracle.as_ref().map_or(f64::NAN, |o| o.value(k)),
            converged: true,
            spectrum_file: file.clone(),
            density_file: Some(format!("densities/{name}.off-density")),
        });
    }
    if partition.is_pure_steklov() {
        let topology = mesh.topology();
        for k in 1..=config.k_max {
            run.records.push(RunRecord {
                label: "sigma_bar".into(),
                parameter: 0.0,
                k,
                value: spectrum.sigma_bar(k),
                reference: topology.sigma_bar_bound(k),
                converged: true,
                spectrum_file: file.clone(),
                density_file: Some(format!("densities/{name}.off-density")),
            });
        }
    }
    if config.export_matrices {
        run.push_artifact("matrices/stiffness.mtx".into(), assemble_stiffness(&mesh).to_matrix_market());
        let mass = assemble_boundary_mass(&mesh, &partition, &density, config.solver.mass)?;
        run.push_artifact("matrices/boundary_mass.mtx".into(), mass.to_matrix_market());
    }
    run.finished_unix = unix_now();
    Ok(run)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizeConfig {
    #[serde(flatten)]
    pub surface: SurfaceSource,
    #[serde(default = "default_k_list")]
    pub k_list: Vec<usize>,
    /// Nested refinements used to correct the final estimate for the
    /// discretization error; 0 disables the correction.
    #[serde(default = "default_levels")]
    pub correction_levels: usize,
    #[serde(default)]
    pub optimizer: OptimizerOptions,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            surface: SurfaceSource::default(),
            k_list: default_k_list(),
            correction_levels: default_levels(),
            optimizer: OptimizerOptions::default(),
        }
    }
}

/// Conformal supremum estimates for every `k` of the list. Records labelled
/// `raw` hold the optimized discrete value, `corrected` its nested-refinement
/// extrapolation; the reference is the topological bound on pure Steklov
/// problems and the uniform-density value otherwise.
pub fn run_optimize(config: &OptimizeConfig) -> Result<ExperimentRun> {
    if config.k_list.is_empty() || config.k_list.contains(&0) {
        return Err(Error::param("k_list must be non-empty with every k >= 1"));
    }
    let mut run = ExperimentRun::new("optimize", serde_json::to_value(config)?);
    let (mesh, partition, _) = config.surface.load()?;
    let problem = SpectralProblem::new(mesh.clone(), partition.clone(), config.optimizer.solver)?;
    let name = config.surface.name();
    run.push_artifact(format!("meshes/{name}.off"), off::write_off_string(&mesh));
    for &k in &config.k_list {
        let est = maximize_on_problem(&problem, k, &config.optimizer)?;
        let reference = if partition.is_pure_steklov() { mesh.topology().sigma_bar_bound(k) } else { est.uniform_value };
        let spectrum_file = format!("spectra/{name}-k{k}.csv");
        let density_file = format!("densities/{name}-k{k}.off-density");
        run.push_artifact(spectrum_file.clone(), problem.solve(&est.density, k)?.to_csv());
        run.push_artifact(density_file.clone(), dump::write_density_dump(&mesh, &partition, &est.density));
        run.push_artifact(format!("traces/{name}-k{k}.csv"), est.trace_csv());
        let record = |label: &str, value: f64| RunRecord {
            label: label.into(),
            parameter: 0.0,
            k,
            value,
            reference,
            converged: est.converged,
            spectrum_file: spectrum_file.clone(),
            density_file: Some(density_file.clone()),
        };
        run.records.push(record("raw", est.value));
        if config.correction_levels > 0 {
            let (values, corrected) =
                refined_sigma_bar(&mesh, &partition, &est.density, k, config.correction_levels, &config.optimizer.solver)?;
            run.notes.push(format!(
                "k={k}: start {}, nested values {}",
                est.start,
                values.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(" ")
            ));
            run.records.push(record("corrected", corrected));
        }
    }
    run.finished_unix = unix_now();
    Ok(run)
}

/// Writes a mesh and its partition (as a unit-density dump) for inspection.
pub fn mesh_artifacts(surface: &SurfaceSource) -> Result<ExperimentRun> {
    let mut run = ExperimentRun::new("mesh", serde_json::to_value(surface)?);
    let (mesh, partition, density) = surface.load()?;
    let density = density.unwrap_or_else(|| BoundaryDensity::uniform(&mesh, &partition));
    let name = surface.name();
    run.push_artifact(format!("meshes/{name}.off"), off::write_off_string(&mesh));
    run.push_artifact(format!("densities/{name}.off-density"), dump::write_density_dump(&mesh, &partition, &density));
    let conn = mesh.connectivity();
    run.notes.push(format!(
        "{name}: {} vertices, {} triangles, {} boundary loops, euler characteristic {}, boundary length {}, steklov length {}, max edge {}",
        conn.vertex_count(),
        mesh.triangles().len(),
        mesh.boundary_loops().len(),
        mesh.euler_characteristic(),
        mesh.boundary_length(),
        partition.steklov_length(&mesh),
        mesh.max_edge_length(),
    ));
    run.finished_unix = unix_now();
    Ok(run)
}
