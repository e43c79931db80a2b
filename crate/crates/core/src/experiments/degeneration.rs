//! Conformal suprema along degenerating families of conformal classes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::plot::{LinePlot, Series};
use super::{dump, richardson_limit, run_parallel, tag, unix_now, ExperimentRun, RunRecord, SeriesLimit};
use crate::error::{Error, Result};
use crate::mesh::{
    build_collar_mesh, build_disc_mesh, build_graded_cylinder_mesh, build_graded_moebius_mesh, off, BoundaryPartition,
    CollarChart, Grading, StripType, SurfaceMesh,
};
use crate::optimize::{maximize_normalized_eigenvalue, refined_sigma_bar, ConformalSupremumEstimate, OptimizerOptions};
use crate::spectrum::{degeneration_limit, CompositionTable, SpectralProblem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Flat cylinders of circumference 2 pi; the parameter is the height.
    #[serde(alias = "cylinder")]
    CylinderModulus,
    /// Flat Möbius bands; the parameter is the height of the fundamental strip.
    #[serde(alias = "moebius")]
    MoebiusModulus,
    /// Collar charts truncated at a fixed fraction of the collar width; the
    /// parameter is the geodesic length.
    #[serde(alias = "collar")]
    CollarTruncation,
    /// The disc has a single conformal class; the parameter is ignored.
    Disc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    ToZero,
    ToInfinity,
}

fn default_refinement() -> u32 {
    3
}
fn default_fine_fraction() -> f64 {
    0.01
}
fn default_grading_ratio() -> f64 {
    1.15
}
fn default_strip() -> StripType {
    StripType::BoundaryCollar
}
fn default_truncation() -> f64 {
    0.8
}
fn default_levels() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegenerationSchedule {
    pub family: Family,
    pub parameter_grid: Vec<f64>,
    pub direction: Direction,
    pub k_list: Vec<usize>,
    #[serde(default = "default_refinement")]
    pub refinement: u32,
    /// Finest spacing of graded meshes, relative to `min(parameter, 2 pi)`.
    #[serde(default = "default_fine_fraction")]
    pub fine_fraction: f64,
    #[serde(default = "default_grading_ratio")]
    pub grading_ratio: f64,
    #[serde(default = "default_strip")]
    pub strip: StripType,
    /// Collar truncation as a fraction of the collar width.
    #[serde(default = "default_truncation")]
    pub truncation_fraction: f64,
    /// Nested refinements used to correct the recorded value of each
    /// optimized density; 0 records the raw value.
    #[serde(default = "default_levels")]
    pub correction_levels: usize,
    #[serde(default)]
    pub optimizer: OptimizerOptions,
}

impl DegenerationSchedule {
    pub fn new(family: Family, parameter_grid: Vec<f64>, direction: Direction, k_list: Vec<usize>) -> Self {
        Self {
            family,
            parameter_grid,
            direction,
            k_list,
            refinement: default_refinement(),
            fine_fraction: default_fine_fraction(),
            grading_ratio: default_grading_ratio(),
            strip: default_strip(),
            truncation_fraction: default_truncation(),
            correction_levels: default_levels(),
            optimizer: OptimizerOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.parameter_grid;
        if g.len() < 4 {
            return Err(Error::param("degeneration grid needs at least 4 points"));
        }
        if g.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::param("grid parameters must be positive and finite"));
        }
        let up = g.windows(2).all(|w| w[1] > w[0]);
        let down = g.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(Error::param("grid must be strictly monotone"));
        }
        if self.k_list.is_empty() || self.k_list.contains(&0) {
            return Err(Error::param("k_list must be non-empty with k >= 1"));
        }
        if !(self.truncation_fraction > 0.0 && self.truncation_fraction < 1.0) {
            return Err(Error::param("truncation fraction must lie in (0, 1)"));
        }
        if !(self.fine_fraction > 0.0 && self.grading_ratio > 1.0) {
            return Err(Error::param("grading needs fine_fraction > 0 and ratio > 1"));
        }
        Ok(())
    }

    pub fn build_mesh(&self, parameter: f64) -> Result<SurfaceMesh> {
        let grading = Grading { fine: self.fine_fraction * parameter.min(2.0 * PI), ratio: self.grading_ratio };
        match self.family {
            Family::CylinderModulus => build_graded_cylinder_mesh(parameter, self.refinement, grading),
            Family::MoebiusModulus => build_graded_moebius_mesh(parameter, self.refinement, grading),
            Family::CollarTruncation => {
                let chart = CollarChart::new(parameter, self.strip)?;
                build_collar_mesh(chart, self.truncation_fraction * chart.width, self.refinement)
            }
            Family::Disc => build_disc_mesh(self.refinement),
        }
    }

    /// Limiting space: no surviving components, only round discs. A long
    /// cylinder or collar splits into two discs, every other family here
    /// leaves one.
    pub fn limit_space(&self) -> CompositionTable {
        let discs = match (self.family, self.direction, self.strip) {
            (Family::CylinderModulus, Direction::ToInfinity, _) => 2,
            (Family::CollarTruncation, _, StripType::BoundaryCollar | StripType::InteriorCollar) => 2,
            _ => 1,
        };
        CompositionTable { component_tables: Vec::new(), disc_count: discs }
    }

    pub fn predicted_limit(&self, k: usize) -> Result<f64> {
        degeneration_limit(&self.limit_space(), k)
    }

    fn family_name(&self) -> &'static str {
        match self.family {
            Family::CylinderModulus => "cylinder",
            Family::MoebiusModulus => "moebius",
            Family::CollarTruncation => "collar",
            Family::Disc => "disc",
        }
    }
}

struct PointResult {
    parameter: f64,
    mesh: SurfaceMesh,
    partition: BoundaryPartition,
    estimates: Vec<PointEstimate>,
}

struct PointEstimate {
    est: ConformalSupremumEstimate,
    spectrum_csv: String,
    /// Raw value followed by the nested refinements.
    nested: Vec<f64>,
    value: f64,
}

fn optimize_point(schedule: &DegenerationSchedule, parameter: f64) -> Result<PointResult> {
    let mesh = schedule.build_mesh(parameter)?;
    let partition = BoundaryPartition::all_steklov(&mesh);
    let problem = SpectralProblem::new(mesh.clone(), partition.clone(), schedule.optimizer.solver)?;
    let mut estimates = Vec::new();
    for &k in &schedule.k_list {
        let est = crate::optimize::maximize_on_problem(&problem, k, &schedule.optimizer)?;
        let spectrum_csv = problem.solve(&est.density, k)?.to_csv();
        // optimized densities concentrate at the mesh scale, where the
        // elements overshoot most
        let (nested, value) = if schedule.correction_levels > 0 {
            refined_sigma_bar(&mesh, &partition, &est.density, k, schedule.correction_levels, &schedule.optimizer.solver)?
        } else {
            (vec![est.value], est.value)
        };
        estimates.push(PointEstimate { est, spectrum_csv, nested, value });
    }
    Ok(PointResult { parameter, mesh, partition, estimates })
}

/// Optimizes every `k` at every grid point and compares with the predicted
/// degeneration limit.
pub fn run_degeneration(schedule: &DegenerationSchedule) -> Result<ExperimentRun> {
    schedule.validate()?;
    if schedule.family == Family::Disc {
        return Err(Error::param("the disc has a single conformal class; nothing degenerates"));
    }
    let mut run = ExperimentRun::new("degeneration", serde_json::to_value(schedule)?);
    let results = run_parallel(schedule.parameter_grid.clone(), |p| {
        optimize_point(schedule, p).map_err(|e| Error::AtParameter { parameter: p, source: Box::new(e) })
    })?;
    let results: Vec<PointResult> = results.into_iter().collect::<Result<_>>()?;
    let name = schedule.family_name();
    for point in &results {
        let ptag = tag(point.parameter);
        run.push_artifact(format!("meshes/{name}-p{ptag}.off"), off::write_off_string(&point.mesh));
        for pe in &point.estimates {
            let (est, k) = (&pe.est, pe.est.k);
            let spectrum_file = format!("spectra/{name}-p{ptag}-k{k}.csv");
            let density_file = format!("densities/{name}-p{ptag}-k{k}.off-density");
            run.push_artifact(spectrum_file.clone(), pe.spectrum_csv.clone());
            run.push_artifact(density_file.clone(), dump::write_density_dump(&point.mesh, &point.partition, &est.density));
            run.push_artifact(format!("traces/{name}-p{ptag}-k{k}.csv"), est.trace_csv());
            run.records.push(RunRecord {
                label: name.to_string(),
                parameter: point.parameter,
                k,
                value: pe.value,
                reference: schedule.predicted_limit(k)?,
                converged: est.converged,
                spectrum_file,
                density_file: Some(density_file),
            });
            if pe.nested.len() > 1 {
                run.notes.push(format!(
                    "{name} parameter {} k={k}: raw {:.6}, nested {}, corrected {:.6}",
                    point.parameter,
                    est.value,
                    pe.nested[1..].iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(" "),
                    pe.value
                ));
            }
        }
        superadditivity_notes(&mut run, point);
    }
    let mut plot = LinePlot::new(&format!("{name}: sigma*_k estimates"), "parameter", "normalized eigenvalue");
    let grid = &schedule.parameter_grid;
    plot.log_x = grid.iter().cloned().fold(0.0, f64::max) / grid.iter().cloned().fold(f64::INFINITY, f64::min) > 10.0;
    for &k in &schedule.k_list {
        let pts: Vec<(f64, f64)> = run.records_for(name, k).iter().map(|r| (r.parameter, r.value)).collect();
        let limit = series_limit(schedule, k, &pts)?;
        plot.series.push(Series { label: format!("k = {k}"), points: pts });
        plot.references.push((format!("predicted {:.4}", limit.predicted), limit.predicted));
        run.limits.push(limit);
    }
    run.push_artifact(format!("plots/{name}-trend.svg"), plot.to_svg());
    run.finished_unix = unix_now();
    Ok(run)
}

/// Endpoint and extrapolated limit, using the three points closest to the
/// degeneration (`1 / parameter` when it goes to infinity).
fn series_limit(schedule: &DegenerationSchedule, k: usize, pts: &[(f64, f64)]) -> Result<SeriesLimit> {
    let mut toward: Vec<(f64, f64)> = pts
        .iter()
        .map(|&(p, v)| match schedule.direction {
            Direction::ToZero => (p, v),
            Direction::ToInfinity => (1.0 / p, v),
        })
        .collect();
    // order so the degeneration end comes last
    toward.sort_by(|a, b| b.0.total_cmp(&a.0));
    Ok(SeriesLimit {
        k,
        predicted: schedule.predicted_limit(k)?,
        endpoint: toward.last().map(|p| p.1).unwrap_or(f64::NAN),
        richardson: richardson_limit(&toward),
    })
}

/// Lower-bound audit `sigma*_k >= sigma*_{k-1} + 2 pi`, with 5% of 2 pi
/// slack. Estimates are lower bounds, so failures are reported, not raised.
fn superadditivity_notes(run: &mut ExperimentRun, point: &PointResult) {
    let slack = 0.05 * 2.0 * PI;
    for pe in &point.estimates {
        let k = pe.est.k;
        let prev = if k == 1 {
            Some(0.0)
        } else {
            point.estimates.iter().find(|e| e.est.k == k - 1).map(|e| e.value)
        };
        if let Some(prev) = prev {
            let ok = pe.value >= prev + 2.0 * PI - slack;
            run.notes.push(format!(
                "superadditivity at parameter {}: sigma*_{k} = {:.6} vs sigma*_{} + 2 pi = {:.6}: {}",
                point.parameter,
                pe.value,
                k - 1,
                prev + 2.0 * PI,
                if ok { "ok" } else { "WARNING below" }
            ));
        }
    }
}

/// Estimate of the infimum over conformal classes of `sigma*_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FnEstimate {
    pub k: usize,
    pub min: f64,
    pub argmin: f64,
    /// The minimum sits at the grid point nearest the degeneration.
    pub at_endpoint: bool,
    /// Change of the estimate per unit parameter over the last grid step
    /// toward the degeneration.
    pub trend_slope: f64,
    /// Estimates in grid order.
    pub values: Vec<(f64, f64)>,
    pub caveat: String,
}

/// Minimum of the `sigma*_k` estimates over the grid. The discrete estimates
/// are lower bounds of `sigma*_k`, so the minimum is only an estimate of the
/// infimum, approached from below at each class.
pub fn estimate_friedlander_nadirashvili(schedule: &DegenerationSchedule, k: usize) -> Result<FnEstimate> {
    let caveat = "discrete estimates bound each sigma*_k from below; the minimum over a finite grid is not a certified bound"
        .to_string();
    if schedule.family == Family::Disc {
        let mesh = schedule.build_mesh(1.0)?;
        let partition = BoundaryPartition::all_steklov(&mesh);
        let est = maximize_normalized_eigenvalue(&mesh, &partition, k, &schedule.optimizer)?;
        let value = if schedule.correction_levels > 0 {
            refined_sigma_bar(&mesh, &partition, &est.density, k, schedule.correction_levels, &schedule.optimizer.solver)?.1
        } else {
            est.value
        };
        return Ok(FnEstimate {
            k,
            min: value,
            argmin: f64::NAN,
            at_endpoint: true,
            trend_slope: 0.0,
            values: vec![(f64::NAN, value)],
            caveat,
        });
    }
    let mut single = schedule.clone();
    single.k_list = vec![k];
    let run = run_degeneration(&single)?;
    let values: Vec<(f64, f64)> = run.records.iter().map(|r| (r.parameter, r.value)).collect();
    let (argmin, min) = values.iter().cloned().fold((f64::NAN, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    let mut ordered = values.clone();
    ordered.sort_by(|a, b| a.0.total_cmp(&b.0));
    if schedule.direction == Direction::ToInfinity {
        ordered.reverse();
    }
    // ordered[0] is the degeneration end
    let trend_slope = (ordered[0].1 - ordered[1].1) / (ordered[0].0 - ordered[1].0);
    let endpoint = ordered[0];
    Ok(FnEstimate { k, min, argmin, at_endpoint: endpoint.0 == argmin, trend_slope, values, caveat })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules_are_validated() {
        let ok = DegenerationSchedule::new(Family::CylinderModulus, vec![4.0, 2.0, 1.0, 0.5], Direction::ToZero, vec![1]);
        ok.validate().unwrap();
        let mut bad = ok.clone();
        bad.parameter_grid = vec![4.0, 2.0, 1.0];
        assert!(bad.validate().is_err());
        bad.parameter_grid = vec![4.0, 2.0, 3.0, 1.0];
        assert!(bad.validate().is_err());
        bad.parameter_grid = vec![4.0, 2.0, 1.0, -1.0];
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.k_list = vec![0];
        assert!(bad.validate().is_err());
    }

    #[test]
    fn predicted_limits_are_two_pi_k() {
        for (family, dir) in [
            (Family::CylinderModulus, Direction::ToZero),
            (Family::CylinderModulus, Direction::ToInfinity),
            (Family::MoebiusModulus, Direction::ToZero),
            (Family::CollarTruncation, Direction::ToZero),
        ] {
            let s = DegenerationSchedule::new(family, vec![1.0, 0.5, 0.25, 0.1], dir, vec![1, 2, 3]);
            for k in 1..4 {
                assert!((s.predicted_limit(k).unwrap() - 2.0 * PI * k as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn small_cylinder_run_has_layout() {
        let mut s = DegenerationSchedule::new(Family::CylinderModulus, vec![2.0, 1.0, 0.5, 0.25], Direction::ToZero, vec![1]);
        s.refinement = 1;
        s.optimizer.max_iters = 3;
        s.optimizer.random_starts = 0;
        s.optimizer.bubble_starts = false;
        s.correction_levels = 0;
        let run = run_degeneration(&s).unwrap();
        assert_eq!(run.records.len(), 4);
        assert_eq!(run.limits.len(), 1);
        assert!(run.limits[0].richardson.is_some());
        let dir = tempfile::tempdir().unwrap();
        run.persist(dir.path()).unwrap();
        for f in ["config.json", "report.csv", "run.json", "plots/cylinder-trend.svg", "spectra/cylinder-p0.5-k1.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        // recorded estimates are reproducible from the dumps
        for r in &run.records {
            let mesh = off::read_off(dir.path().join(format!("meshes/cylinder-p{}.off", tag(r.parameter)))).unwrap();
            let text = std::fs::read_to_string(dir.path().join(r.density_file.as_ref().unwrap())).unwrap();
            let v = dump::recompute_sigma_bar(&mesh, &text, r.k, &s.optimizer.solver).unwrap();
            assert!((v - r.value).abs() <= 1e-10 * r.value, "{v} vs {}", r.value);
        }
    }
}
