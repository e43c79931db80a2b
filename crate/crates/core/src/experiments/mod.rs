//! End-to-end experiments: degeneration schedules, ball removal, density
//! jumps and bound audits, with their on-disk run layout.

pub mod audit;
pub mod degeneration;
pub mod dump;
pub mod estimate;
pub mod plot;
pub mod removal;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{
    build_annulus_mesh, build_collar_mesh, build_disc_mesh, build_flat_cylinder_mesh, build_half_disc_mesh,
    build_moebius_mesh, build_notched_disc_mesh, build_rectangle_mesh, on_curve, partition_boundary,
    BoundaryCurve, BoundaryPartition, CollarChart, StripType, SurfaceMesh,
};
use crate::oracle::{OracleProblem, OracleSpectrum};

pub use audit::{run_bound_audit, AuditConfig, AuditReport, AuditRow, Violation};
pub use degeneration::{
    estimate_friedlander_nadirashvili, run_degeneration, DegenerationSchedule, Direction, Family, FnEstimate,
};
pub use estimate::{mesh_artifacts, run_optimize, run_spectrum, OptimizeConfig, SpectrumConfig, SurfaceSource};
pub use removal::{run_ball_removal, run_density_jump, BallRemovalConfig, DensityJumpConfig};

/// Environment variable holding the worker count for grid points.
pub const WORKERS_ENV: &str = "STEKLOV_WORKERS";

/// Workers from [`WORKERS_ENV`], else the available parallelism.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Maps `f` over `items` on the worker pool, keeping input order.
pub fn run_parallel<T: Send, R: Send>(items: Vec<T>, f: impl Fn(T) -> R + Sync + Send) -> Result<Vec<R>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| Error::param(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| items.into_par_iter().map(f).collect()))
}

/// Model geometries with their default boundary partition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Shape {
    Disc,
    /// `inner <= |z| <= 1`, Steklov on both circles.
    Annulus { inner: f64 },
    /// Same annulus with a Neumann inner circle.
    NeumannHoleAnnulus { inner: f64 },
    /// Flat cylinder of circumference 2 pi.
    Cylinder { height: f64 },
    Moebius { modulus: f64 },
    /// Steklov arc, Neumann diameter.
    HalfDisc,
    /// Steklov top side, Neumann elsewhere.
    Rectangle { length: f64, depth: f64 },
    /// Unit disc minus `|z - 1| < epsilon`, Neumann on the cut.
    NotchedDisc { epsilon: f64 },
    /// Collar chart truncated at `fraction` of the collar width.
    Collar { geodesic_length: f64, strip: StripType, fraction: f64 },
}

impl Shape {
    pub fn name(&self) -> String {
        match *self {
            Shape::Disc => "disc".into(),
            Shape::Annulus { inner } => format!("annulus-{inner}"),
            Shape::NeumannHoleAnnulus { inner } => format!("neumann-hole-annulus-{inner}"),
            Shape::Cylinder { height } => format!("cylinder-{height}"),
            Shape::Moebius { modulus } => format!("moebius-{modulus}"),
            Shape::HalfDisc => "half-disc".into(),
            Shape::Rectangle { length, depth } => format!("rectangle-{length}x{depth}"),
            Shape::NotchedDisc { epsilon } => format!("notched-disc-{epsilon}"),
            Shape::Collar { geodesic_length, .. } => format!("collar-{geodesic_length}"),
        }
    }

    /// Mesh at `refinement` and its Steklov/Neumann partition.
    pub fn build(&self, refinement: u32) -> Result<(SurfaceMesh, BoundaryPartition)> {
        let unit = BoundaryCurve::Circle { center: [0.0, 0.0], radius: 1.0 };
        let mesh = match *self {
            Shape::Disc => build_disc_mesh(refinement)?,
            Shape::Annulus { inner } | Shape::NeumannHoleAnnulus { inner } => build_annulus_mesh(inner, refinement)?,
            Shape::Cylinder { height } => build_flat_cylinder_mesh(height, refinement)?,
            Shape::Moebius { modulus } => build_moebius_mesh(modulus, refinement)?,
            Shape::HalfDisc => build_half_disc_mesh(refinement)?,
            Shape::Rectangle { length, depth } => {
                let n = 8usize << refinement;
                let ny = ((n as f64 * depth / length).ceil() as usize).max(1);
                build_rectangle_mesh(length, depth, n, ny)?
            }
            Shape::NotchedDisc { epsilon } => build_notched_disc_mesh(epsilon, refinement)?,
            Shape::Collar { geodesic_length, strip, fraction } => {
                let chart = CollarChart::new(geodesic_length, strip)?;
                build_collar_mesh(chart, fraction * chart.width, refinement)?
            }
        };
        let partition = match *self {
            Shape::NeumannHoleAnnulus { .. } | Shape::HalfDisc | Shape::NotchedDisc { .. } => {
                partition_boundary(&mesh, on_curve(&mesh, unit))?
            }
            Shape::Rectangle { depth, .. } => partition_boundary(&mesh, |e| {
                let top = |v: usize| (mesh.position(v)[1] - depth).abs() <= 1e-12 * depth.max(1.0);
                top(e.a) && top(e.b)
            })?,
            _ => BoundaryPartition::all_steklov(&mesh),
        };
        Ok((mesh, partition))
    }

    /// Closed-form spectrum, when one is known.
    pub fn oracle(&self) -> Option<OracleSpectrum> {
        let p = match *self {
            Shape::Disc => OracleProblem::Disc,
            Shape::NeumannHoleAnnulus { inner } => OracleProblem::NeumannHoleAnnulus { inner },
            Shape::Cylinder { height } => OracleProblem::FlatCylinder { height },
            Shape::HalfDisc => OracleProblem::HalfDisc,
            Shape::Rectangle { length, depth } => OracleProblem::SloshingRectangle { length, depth },
            _ => return None,
        };
        Some(OracleSpectrum::new(p))
    }
}

/// One measured value of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Variant or series label.
    pub label: String,
    pub parameter: f64,
    pub k: usize,
    pub value: f64,
    /// Value the measurement is compared with (oracle, predicted limit, ...).
    pub reference: f64,
    pub converged: bool,
    /// Relative path of the persisted spectrum.
    pub spectrum_file: String,
    /// Relative path of the persisted density, for optimizer results.
    pub density_file: Option<String>,
}

impl RunRecord {
    pub fn relative_error(&self) -> f64 {
        (self.value - self.reference) / self.reference.abs()
    }
}

/// A file produced by a run, relative to the run directory.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub path: String,
    pub contents: String,
}

/// Extrapolated and predicted limits of one series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesLimit {
    pub k: usize,
    pub predicted: f64,
    pub endpoint: f64,
    /// Quadratic extrapolation through the last three grid points.
    pub richardson: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ExperimentRun {
    pub name: String,
    /// Snapshot of everything needed to reproduce the run.
    pub config: serde_json::Value,
    pub records: Vec<RunRecord>,
    pub limits: Vec<SeriesLimit>,
    /// Informational findings, e.g. audits reported as trends.
    pub notes: Vec<String>,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub artifacts: Vec<Artifact>,
}

pub(crate) fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl ExperimentRun {
    pub(crate) fn new(name: &str, config: serde_json::Value) -> Self {
        Self {
            name: name.to_string(),
            config,
            records: Vec::new(),
            limits: Vec::new(),
            notes: Vec::new(),
            started_unix: unix_now(),
            finished_unix: 0,
            artifacts: Vec::new(),
        }
    }

    pub fn records_for(&self, label: &str, k: usize) -> Vec<&RunRecord> {
        self.records.iter().filter(|r| r.label == label && r.k == k).collect()
    }

    /// `report.csv`: one line per record.
    pub fn report_csv(&self) -> String {
        let mut s = String::from("label,parameter,k,value,reference,relative_error,converged,spectrum_file,density_file\n");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                r.label,
                r.parameter,
                r.k,
                r.value,
                r.reference,
                r.relative_error(),
                r.converged,
                r.spectrum_file,
                r.density_file.as_deref().unwrap_or("")
            );
        }
        s
    }

    /// Writes `config.json`, `report.csv`, `run.json` and every artifact
    /// under `dir`. Only `run.json` carries timestamps.
    pub fn persist(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config.json"), serde_json::to_string_pretty(&self.config)? + "\n")?;
        std::fs::write(dir.join("report.csv"), self.report_csv())?;
        for a in &self.artifacts {
            let path = dir.join(&a.path);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, &a.contents)?;
        }
        let meta = serde_json::json!({
            "name": self.name,
            "started_unix": self.started_unix,
            "finished_unix": self.finished_unix,
            "limits": self.limits,
            "notes": self.notes,
        });
        std::fs::write(dir.join("run.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
        Ok(dir.to_path_buf())
    }

    pub(crate) fn push_artifact(&mut self, path: String, contents: String) {
        self.artifacts.push(Artifact { path, contents });
    }
}

/// Value at `x = 0` of the quadratic through the last three points.
pub fn richardson_limit(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 3 {
        return None;
    }
    let p = &points[points.len() - 3..];
    // Neville's scheme at x = 0
    let mut v: Vec<f64> = p.iter().map(|q| q.1).collect();
    for level in 1..3 {
        for i in 0..3 - level {
            let (xi, xj) = (p[i].0, p[i + level].0);
            if xi == xj {
                return None;
            }
            v[i] = (xi * v[i + 1] - xj * v[i]) / (xi - xj);
        }
    }
    Some(v[0])
}

/// Parameter formatted for file names.
pub(crate) fn tag(x: f64) -> String {
    format!("{x}").replace('-', "m")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn richardson_is_exact_on_quadratics() {
        let f = |x: f64| 3.0 - 2.0 * x + 0.5 * x * x;
        let pts: Vec<(f64, f64)> = [4.0, 1.0, 0.5, 0.25].iter().map(|&x| (x, f(x))).collect();
        assert!((richardson_limit(&pts).unwrap() - 3.0).abs() < 1e-12);
        assert!(richardson_limit(&pts[..2]).is_none());
    }

    #[test]
    fn workers_from_environment() {
        assert!(worker_count() >= 1);
        let out = run_parallel((0..20).collect(), |i: i32| i * i).unwrap();
        assert_eq!(out, (0..20).map(|i| i * i).collect::<Vec<_>>());
    }

    #[test]
    fn shapes_build_with_partitions() {
        for shape in [
            Shape::Disc,
            Shape::Annulus { inner: 0.4 },
            Shape::NeumannHoleAnnulus { inner: 0.4 },
            Shape::Cylinder { height: 1.0 },
            Shape::Moebius { modulus: 1.0 },
            Shape::HalfDisc,
            Shape::Rectangle { length: 3.0, depth: 1.0 },
            Shape::NotchedDisc { epsilon: 0.2 },
            Shape::Collar { geodesic_length: 1.0, strip: StripType::BoundaryCollar, fraction: 0.8 },
        ] {
            let (mesh, part) = shape.build(2).unwrap();
            let pure = part.is_pure_steklov();
            let mixed = matches!(
                shape,
                Shape::NeumannHoleAnnulus { .. } | Shape::HalfDisc | Shape::Rectangle { .. } | Shape::NotchedDisc { .. }
            );
            assert_eq!(pure, !mixed, "{}", shape.name());
            assert!(part.steklov_length(&mesh) > 0.0);
        }
        let (mesh, part) = Shape::Rectangle { length: 3.0, depth: 1.0 }.build(1).unwrap();
        assert!((part.steklov_length(&mesh) - 3.0).abs() < 1e-12);
    }
}
