//! Fixed-density spectral experiments: removing a small ball with a Neumann
//! condition on its boundary, and letting the density drop to `delta` off a
//! subdomain.

use serde::{Deserialize, Serialize};

use super::plot::{LinePlot, Series};
use super::{run_parallel, tag, unix_now, ExperimentRun, RunRecord, Shape};
use crate::error::{Error, Result};
use crate::fem::BoundaryDensity;
use crate::mesh::{build_flat_cylinder_mesh, partition_boundary, BoundaryPartition};
use crate::oracle::{disc_steklov, neumann_hole_annulus, sloshing_cylinder};
use crate::spectrum::{mixed_spectrum, SolverOptions, Spectrum};

fn default_ball_refinement() -> u32 {
    5
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallRemovalConfig {
    /// Descending cut radii, each at most 0.5.
    pub radius_grid: Vec<f64>,
    pub k_max: usize,
    #[serde(default = "default_ball_refinement")]
    pub refinement: u32,
    /// Also remove a ball of the same radius around the center.
    #[serde(default = "default_true")]
    pub interior: bool,
    #[serde(default)]
    pub solver: SolverOptions,
}

impl BallRemovalConfig {
    pub fn new(radius_grid: Vec<f64>, k_max: usize) -> Self {
        Self { radius_grid, k_max, refinement: default_ball_refinement(), interior: true, solver: SolverOptions::default() }
    }
}

fn spectrum_rows(run: &mut ExperimentRun, label: &str, parameter: f64, spectrum: &Spectrum, reference: impl Fn(usize) -> f64) {
    let file = format!("spectra/{label}-p{}.csv", tag(parameter));
    run.push_artifact(file.clone(), spectrum.to_csv());
    for k in 1..=spectrum.requested {
        run.records.push(RunRecord {
            label: label.to_string(),
            parameter,
            k,
            value: spectrum.sigma(k),
            reference: reference(k),
            converged: true,
            spectrum_file: file.clone(),
            density_file: None,
        });
    }
}

fn error_plot(run: &ExperimentRun, label: &str, k_max: usize, title: &str, x_label: &str) -> String {
    let mut plot = LinePlot::new(title, x_label, "relative error");
    plot.log_x = true;
    for k in 1..=k_max {
        let pts = run.records_for(label, k).iter().map(|r| (r.parameter, r.relative_error().abs())).collect();
        plot.series.push(Series { label: format!("k = {k}"), points: pts });
    }
    plot.to_svg()
}

/// Steklov spectrum of the unit disc with `|z - 1| < epsilon` cut out and a
/// Neumann condition on the cut, compared with the disc.
pub fn run_ball_removal(config: &BallRemovalConfig) -> Result<ExperimentRun> {
    let g = &config.radius_grid;
    if g.is_empty() || g.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::param("radii must be non-empty and strictly descending"));
    }
    if g.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
        return Err(Error::param("radii must lie inside the unit disc"));
    }
    if config.k_max == 0 {
        return Err(Error::param("k_max must be at least 1"));
    }
    let mut run = ExperimentRun::new("ball-removal", serde_json::to_value(config)?);
    let solve = |shape: Shape| -> Result<Spectrum> {
        let (mesh, part) = shape.build(config.refinement)?;
        mixed_spectrum(&mesh, &part, None, config.k_max, &config.solver)
    };
    let notched = run_parallel(g.clone(), |eps| solve(Shape::NotchedDisc { epsilon: eps }))?;
    for (&eps, result) in g.iter().zip(notched) {
        match result {
            Ok(s) => spectrum_rows(&mut run, "notched", eps, &s, disc_steklov),
            Err(e) => run.notes.push(format!("notched disc at epsilon {eps}: {e}")),
        }
    }
    if config.interior {
        let interior = run_parallel(g.clone(), |eps| solve(Shape::NeumannHoleAnnulus { inner: eps }))?;
        for (&eps, result) in g.iter().zip(interior) {
            match result {
                Ok(s) => {
                    let exact: Vec<String> = (1..=config.k_max)
                        .map(|k| format!("{:.3e}", (s.sigma(k) - neumann_hole_annulus(eps, k)) / neumann_hole_annulus(eps, k)))
                        .collect();
                    run.notes.push(format!("interior hole {eps}: error vs exact annulus spectrum {}", exact.join(" ")));
                    spectrum_rows(&mut run, "interior", eps, &s, disc_steklov);
                }
                Err(e) => run.notes.push(format!("interior hole at epsilon {eps}: {e}")),
            }
        }
    }
    for label in ["notched", "interior"] {
        for k in 1..=config.k_max {
            let errs: Vec<f64> = run.records_for(label, k).iter().map(|r| r.relative_error().abs()).collect();
            if errs.len() > 1 {
                let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
                run.notes.push(format!(
                    "{label} k={k}: errors {} {}",
                    errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(" "),
                    if decreasing { "strictly decreasing" } else { "NOT strictly decreasing" }
                ));
            }
        }
    }
    let svg = error_plot(&run, "notched", config.k_max, "ball removal: error vs disc", "epsilon");
    run.push_artifact("plots/ball-removal.svg".into(), svg);
    run.finished_unix = unix_now();
    Ok(run)
}

fn default_height() -> f64 {
    1.0
}
fn default_jump_refinement() -> u32 {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityJumpConfig {
    /// Descending densities in `(0, 1]`.
    pub delta_grid: Vec<f64>,
    pub k_max: usize,
    #[serde(default = "default_height")]
    pub height: f64,
    #[serde(default = "default_jump_refinement")]
    pub refinement: u32,
    #[serde(default)]
    pub solver: SolverOptions,
}

impl DensityJumpConfig {
    pub fn new(delta_grid: Vec<f64>, k_max: usize) -> Self {
        Self {
            delta_grid,
            k_max,
            height: default_height(),
            refinement: default_jump_refinement(),
            solver: SolverOptions::default(),
        }
    }
}

/// Densities below this are refused: the mass matrix loses too many digits.
pub const MIN_DELTA: f64 = 1e-10;

/// Cylinder of height `h` whose boundary density is 1 on the top circle and
/// `delta^{1/2}` on the bottom one, compared with the sloshing spectrum of
/// the upper half (Steklov top, Neumann on the middle circle).
pub fn run_density_jump(config: &DensityJumpConfig) -> Result<ExperimentRun> {
    let g = &config.delta_grid;
    if g.is_empty() || g.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::param("deltas must be non-empty and strictly descending"));
    }
    if g.iter().any(|&d| !(d > 0.0 && d <= 1.0)) {
        return Err(Error::param("deltas must lie in (0, 1]"));
    }
    let h = config.height;
    let mut run = ExperimentRun::new("density-jump", serde_json::to_value(config)?);
    let upper = build_flat_cylinder_mesh(0.5 * h, config.refinement)?;
    let top_of = |mesh: &crate::mesh::SurfaceMesh, v: usize, t: f64| (mesh.position(v)[1] - t).abs() <= 1e-12 * t.max(1.0);
    let upper_part = partition_boundary(&upper, |e| top_of(&upper, e.a, 0.5 * h) && top_of(&upper, e.b, 0.5 * h))?;
    let omega = mixed_spectrum(&upper, &upper_part, None, config.k_max, &config.solver)?;
    let omega_file = "spectra/omega-sloshing.csv".to_string();
    run.push_artifact(omega_file.clone(), omega.to_csv());
    for k in 1..=config.k_max {
        run.records.push(RunRecord {
            label: "omega".into(),
            parameter: 0.0,
            k,
            value: omega.sigma(k),
            reference: sloshing_cylinder(0.5 * h, k),
            converged: true,
            spectrum_file: omega_file.clone(),
            density_file: None,
        });
    }
    let mesh = build_flat_cylinder_mesh(h, config.refinement)?;
    let partition = BoundaryPartition::all_steklov(&mesh);
    let ids = partition.steklov_vertices(&mesh);
    let tags: Vec<u32> = ids.iter().map(|&v| top_of(&mesh, v, h) as u32).collect();
    let results = run_parallel(g.clone(), |delta| -> Result<Option<Spectrum>> {
        if delta < MIN_DELTA {
            return Ok(None);
        }
        let w = tags.iter().map(|&t| if t == 1 { 1.0 } else { delta.sqrt() }).collect();
        let density = BoundaryDensity::new(ids.clone(), w)?.with_region_tags(tags.clone())?;
        mixed_spectrum(&mesh, &partition, Some(&density), config.k_max, &config.solver).map(Some)
    })?;
    for (&delta, result) in g.iter().zip(results) {
        match result.map_err(|e| Error::AtParameter { parameter: delta, source: Box::new(e) })? {
            Some(s) => spectrum_rows(&mut run, "jump", delta, &s, |k| omega.sigma(k)),
            None => run.notes.push(format!("delta {delta} refused: below {MIN_DELTA}")),
        }
    }
    let svg = error_plot(&run, "jump", config.k_max, "density jump: gap to the sloshing spectrum", "delta");
    run.push_artifact("plots/density-jump.svg".into(), svg);
    run.finished_unix = unix_now();
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::steklov_spectrum;

    #[test]
    fn ball_removal_converges_on_a_coarse_mesh() {
        let mut cfg = BallRemovalConfig::new(vec![0.2, 0.1, 0.05], 2);
        cfg.refinement = 3;
        let run = run_ball_removal(&cfg).unwrap();
        for k in 1..=2 {
            let errs: Vec<f64> = run.records_for("notched", k).iter().map(|r| r.relative_error().abs()).collect();
            assert_eq!(errs.len(), 3);
            assert!(errs[2] < errs[0], "{errs:?}");
        }
        assert_eq!(run.records_for("interior", 1).len(), 3);
        assert!(run_ball_removal(&BallRemovalConfig::new(vec![0.1, 0.2], 2)).is_err());
    }

    #[test]
    fn density_jump_trivial_and_refused_points() {
        let mut cfg = DensityJumpConfig::new(vec![1.0, 1e-3, 1e-12], 3);
        cfg.refinement = 2;
        let run = run_density_jump(&cfg).unwrap();
        let uniform = steklov_spectrum(&build_flat_cylinder_mesh(1.0, 2).unwrap(), None, 3, &cfg.solver).unwrap();
        for k in 1..=3 {
            let r = run.records_for("jump", k);
            assert_eq!(r.len(), 2);
            assert_eq!(r[0].value, uniform.sigma(k));
            // less boundary mass raises the eigenvalues
            assert!(r[1].value > r[0].value);
        }
        assert!(run.notes.iter().any(|n| n.contains("refused")));
        assert!(run_density_jump(&DensityJumpConfig::new(vec![2.0, 1.0], 1)).is_err());
    }
}
