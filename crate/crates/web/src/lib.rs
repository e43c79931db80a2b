//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export is a thin wrapper over a plain Rust function so the logic
//! can be tested natively; the wrappers only turn errors into JS errors.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use steklov_lab::cli::shape_value;
use steklov_lab::experiments::Shape;
use steklov_lab::optimize::{maximize_on_problem, OptimizerOptions};
use steklov_lab::spectrum::{degeneration_limit, CompositionTable, SolverOptions, SpectralProblem};

/// The browser runs single-threaded and small meshes only.
pub const MAX_REFINEMENT: u32 = 4;

#[derive(Debug, Serialize)]
pub struct SpectrumView {
    pub shape: String,
    pub sigma: Vec<f64>,
    pub sigma_bar: Vec<f64>,
    /// Closed-form values where known, else empty.
    pub oracle: Vec<f64>,
    pub pure_steklov: bool,
    pub mesh: MeshView,
}

#[derive(Debug, Serialize)]
pub struct MeshView {
    /// `x, y` per raw vertex; glued meshes keep both copies of a seam.
    pub points: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    /// Position of every Steklov vertex, in the order of the density.
    pub steklov_points: Vec<[f64; 2]>,
}

#[derive(Debug, Serialize)]
pub struct OptimizeView {
    pub k: usize,
    pub value: f64,
    pub uniform_value: f64,
    pub bound: Option<f64>,
    pub converged: bool,
    pub start: String,
    /// Steklov vertex ids and their density `rho = w^2`.
    pub vertices: Vec<usize>,
    pub density: Vec<f64>,
    pub trace: Vec<f64>,
    pub mesh: MeshView,
}

fn build(spec: &str, refinement: u32) -> Result<SpectralProblem, String> {
    if refinement > MAX_REFINEMENT {
        return Err(format!("refinement {refinement} is too fine for the browser (max {MAX_REFINEMENT})"));
    }
    let shape: Shape = serde_json::from_value(shape_value(spec)?).map_err(|e| e.to_string())?;
    let (mesh, partition) = shape.build(refinement).map_err(|e| e.to_string())?;
    SpectralProblem::new(mesh, partition, SolverOptions::default()).map_err(|e| e.to_string())
}

fn mesh_view(problem: &SpectralProblem) -> MeshView {
    let mesh = problem.mesh();
    let flat = |p: [f64; 3]| [p[0], p[1]];
    MeshView {
        points: mesh.vertices().iter().map(|&p| flat(p)).collect(),
        triangles: mesh.triangles().to_vec(),
        steklov_points: problem.steklov_vertices().iter().map(|&v| flat(mesh.position(v))).collect(),
    }
}

/// Spectrum at unit density of a shape given as `name[:p1[,p2]]`.
pub fn spectrum_view(spec: &str, refinement: u32, k_max: usize) -> Result<SpectrumView, String> {
    let problem = build(spec, refinement)?;
    let s = problem.solve(&problem.uniform_density(), k_max).map_err(|e| e.to_string())?;
    let shape: Shape = serde_json::from_value(shape_value(spec)?).map_err(|e| e.to_string())?;
    Ok(SpectrumView {
        shape: shape.name(),
        sigma: (0..=k_max).map(|k| s.sigma(k)).collect(),
        sigma_bar: (0..=k_max).map(|k| s.sigma_bar(k)).collect(),
        oracle: shape.oracle().map(|o| (0..=k_max).map(|k| o.value(k)).collect()).unwrap_or_default(),
        pure_steklov: problem.partition().is_pure_steklov(),
        mesh: mesh_view(&problem),
    })
}

/// Conformal supremum estimate for one `k`, uniform and bubble starts only.
pub fn optimize_view(spec: &str, refinement: u32, k: usize, max_iters: usize) -> Result<OptimizeView, String> {
    let problem = build(spec, refinement)?;
    let opts = OptimizerOptions { max_iters, random_starts: 0, ..OptimizerOptions::default() };
    let est = maximize_on_problem(&problem, k, &opts).map_err(|e| e.to_string())?;
    let pure = problem.partition().is_pure_steklov();
    Ok(OptimizeView {
        k,
        value: est.value,
        uniform_value: est.uniform_value,
        bound: pure.then(|| problem.mesh().topology().sigma_bar_bound(k)),
        converged: est.converged,
        start: est.start.clone(),
        vertices: est.density.vertex_ids().to_vec(),
        density: est.density.weights().iter().map(|w| w * w).collect(),
        trace: est.trace.iter().map(|t| t.sigma_bar).collect(),
        mesh: mesh_view(&problem),
    })
}

/// Degeneration limit for tables given as a JSON array of arrays.
pub fn limit_value(tables_json: &str, discs: usize, k: usize) -> Result<f64, String> {
    let tables: Vec<Vec<f64>> = serde_json::from_str(tables_json).map_err(|e| e.to_string())?;
    let table = CompositionTable::new(tables, discs).map_err(|e| e.to_string())?;
    degeneration_limit(&table, k).map_err(|e| e.to_string())
}

fn js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let value = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

/// JSON [`SpectrumView`].
#[wasm_bindgen]
pub fn spectrum(spec: &str, refinement: u32, k_max: usize) -> Result<String, JsError> {
    js(spectrum_view(spec, refinement, k_max))
}

/// JSON [`OptimizeView`].
#[wasm_bindgen]
pub fn optimize(spec: &str, refinement: u32, k: usize, max_iters: usize) -> Result<String, JsError> {
    js(optimize_view(spec, refinement, k, max_iters))
}

#[wasm_bindgen]
pub fn degeneration_limit_of(tables_json: &str, discs: usize, k: usize) -> Result<f64, JsError> {
    limit_value(tables_json, discs, k).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn disc_view_matches_closed_form() {
        let v = spectrum_view("disc", 3, 4).unwrap();
        assert_eq!(v.oracle, vec![0.0, 1.0, 1.0, 2.0, 2.0]);
        assert!((v.sigma[1] - 1.0).abs() < 0.01);
        assert!(v.pure_steklov);
        assert_eq!(v.mesh.points.len(), v.mesh.triangles.iter().flatten().max().unwrap() + 1);
        assert_eq!(v.mesh.steklov_points.len(), build("disc", 3).unwrap().steklov_vertices().len());
        assert!(v.mesh.steklov_points.iter().all(|p| (p[0].hypot(p[1]) - 1.0).abs() < 1e-12));
        let json = serde_json::to_string(&v).unwrap();
        assert!(json.contains("\"sigma_bar\""));
    }

    #[test]
    fn mixed_shapes_have_no_bound() {
        let v = optimize_view("half-disc", 2, 1, 10).unwrap();
        assert!(v.bound.is_none());
        assert!(v.value >= v.uniform_value);
        assert_eq!(v.vertices.len(), v.density.len());
        let c = optimize_view("cylinder:1", 2, 1, 10).unwrap();
        assert!(c.bound.is_some() && c.value >= c.uniform_value);
        assert_eq!(c.mesh.steklov_points.len(), c.density.len());
    }

    #[test]
    fn bad_input_is_reported() {
        assert!(spectrum_view("teapot", 2, 3).is_err());
        assert!(spectrum_view("disc", 9, 3).unwrap_err().contains("too fine"));
        assert!(limit_value("[[1, 2]]", 0, 1).is_err());
        assert!((limit_value("[]", 1, 3).unwrap() - 6.0 * PI).abs() < 1e-12);
    }
}
